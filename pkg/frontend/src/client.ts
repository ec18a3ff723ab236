// WebSocket line client with retry. The node's control port accepts the
// upgrade directly; every outbound string is one JSON line.

import { parseServerLine, type ServerMessage } from "./protocol.js";

const MAX_BACKOFF_MS = 5000;

export interface ClientHooks {
  onMessage(msg: ServerMessage): void;
  onStatus(status: "connecting" | "connected" | "disconnected"): void;
}

export class ControlClient {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(private url: string, private hooks: ClientHooks) {}

  start(): void {
    this.closed = false;
    this.connect();
  }

  stop(): void {
    this.closed = true;
    this.ws?.close();
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  /** Send one request line; silently dropped while disconnected. */
  send(line: string): void {
    if (this.connected) {
      this.ws!.send(line);
    }
  }

  private connect(): void {
    this.hooks.onStatus("connecting");
    const ws = new WebSocket(this.url);
    this.ws = ws;

    ws.onopen = () => {
      this.attempts = 0;
      this.hooks.onStatus("connected");
    };
    ws.onmessage = (event) => {
      // a frame may carry one line or several
      for (const line of String(event.data).split("\n")) {
        const msg = parseServerLine(line);
        if (msg) this.hooks.onMessage(msg);
      }
    };
    ws.onclose = () => {
      if (this.ws === ws) this.ws = null;
      this.hooks.onStatus("disconnected");
      this.scheduleRetry();
    };
    ws.onerror = () => {
      ws.close();
    };
  }

  private scheduleRetry(): void {
    if (this.closed) return;
    const backoff = Math.min(250 * 2 ** this.attempts, MAX_BACKOFF_MS);
    this.attempts += 1;
    setTimeout(() => {
      if (!this.closed) this.connect();
    }, backoff);
  }
}
