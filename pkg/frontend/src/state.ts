// UI state store. The view model mutates only here, driven by
// control-channel messages and user input; rendering reads it on frame
// ticks. Pure TypeScript so the whole thing is unit-testable without a
// DOM.

import type { PosName, ServerMessage, SideLetter } from "./protocol.js";

export const FLASH_MS = 120; // fixed decay; bursts restart it, never stretch it
export const TICKER_LIMIT = 200;

export type CellKey = `${SideLetter}:${PosName}`;

export function cellKey(side: SideLetter, pos: PosName): CellKey {
  return `${side}:${pos}`;
}

export const ALL_CELLS: CellKey[] = ["L:front", "L:back", "R:front", "R:back"];

export interface TickerEntry {
  seq: number;
  text: string;
}

export type Connection = "connecting" | "connected" | "disconnected";

export interface Snapshot {
  mode: string;
  pattern: number;
  recording: boolean;
  playing: boolean;
  tile: number;
  peers: number;
}

export class UiState {
  connection: Connection = "connecting";
  mode = "?";
  pattern = 0;
  recording = false;
  playing = false;
  tile = 0;
  peers = 0;
  speed = 1.0;
  impactCount = 0;
  lastError = "";
  ticker: TickerEntry[] = [];
  private flashAt = new Map<CellKey, number>();
  private seq = 0;
  private listeners: Array<(msg: ServerMessage) => void> = [];

  onMessage(listener: (msg: ServerMessage) => void): void {
    this.listeners.push(listener);
  }

  setConnection(connection: Connection): void {
    this.connection = connection;
    if (connection !== "connected") {
      this.pushTicker(`link ${connection}`);
    }
  }

  /** Flash intensity for a cell in [0, 1]; 0 when decayed. */
  flashLevel(cell: CellKey, nowMs: number): number {
    const at = this.flashAt.get(cell);
    if (at === undefined) return 0;
    const age = nowMs - at;
    if (age < 0 || age >= FLASH_MS) return 0;
    return 1 - age / FLASH_MS;
  }

  apply(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "impact": {
        const side = msg.side as SideLetter;
        const pos = msg.pos as PosName;
        this.flashAt.set(cellKey(side, pos), nowMs);
        this.impactCount += 1;
        this.pushTicker(`impact ${side}/${pos} @ ${msg.t_us}us`);
        break;
      }
      case "step_detected":
        this.pushTicker(`step ${msg.side} strength ${msg.strength}`);
        break;
      case "state": {
        this.mode = String(msg.mode);
        this.pattern = Number(msg.pattern);
        this.recording = Boolean(msg.recording);
        this.playing = Boolean(msg.playing);
        this.tile = Number(msg.tile);
        this.peers = Number(msg.peers);
        break;
      }
      case "mode_ack":
        this.mode = String(msg.mode);
        this.pushTicker(`mode -> ${this.mode}`);
        break;
      case "pattern_ack":
        this.pattern = Number(msg.count);
        this.pushTicker(`pattern -> ${this.pattern}`);
        break;
      case "record_ack":
        this.recording = msg.action === "start";
        this.pushTicker(
          msg.action === "start"
            ? "recording started"
            : `recording stopped (${msg.count ?? 0} steps)`,
        );
        break;
      case "play_ack":
        this.playing = true;
        this.speed = Number(msg.speed ?? this.speed);
        this.pushTicker(`playing ${msg.events ?? "?"} events at ${this.speed}x`);
        break;
      case "speed_ack":
        this.speed = Number(msg.speed ?? this.speed);
        this.pushTicker(`speed -> ${this.speed}x`);
        break;
      case "seek_ack":
        this.pushTicker(`seek -> ${msg.t_us ?? 0}us`);
        break;
      case "error":
        this.lastError = String(msg.msg ?? "unknown error");
        this.pushTicker(`error: ${this.lastError}`);
        break;
      default:
        this.pushTicker(`(${msg.type})`);
        break;
    }
    for (const listener of this.listeners) listener(msg);
  }

  private pushTicker(text: string): void {
    this.seq += 1;
    this.ticker.push({ seq: this.seq, text });
    if (this.ticker.length > TICKER_LIMIT) {
      this.ticker.splice(0, this.ticker.length - TICKER_LIMIT);
    }
  }
}
