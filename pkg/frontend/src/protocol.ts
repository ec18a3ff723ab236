// Control-channel vocabulary: newline-delimited JSON, one object per
// line, mirrored from the node. Unknown server message types are kept
// (they land in the ticker) but never throw.

export type SideLetter = "L" | "R";
export type PosName = "front" | "back";
export type ModeName = "solo" | "group" | "instruction" | "theater";

export interface ImpactMessage {
  type: "impact";
  tile: number;
  side: SideLetter;
  pos: PosName;
  t_us: number;
}

export interface StepDetectedMessage {
  type: "step_detected";
  tile: number;
  side: SideLetter;
  t_us: number;
  strength: number;
}

export interface StateMessage {
  type: "state";
  node_id: number;
  tile: number;
  mode: ModeName;
  role: string;
  pattern: number;
  recording: boolean;
  playing: boolean;
  peers: number;
}

export interface ErrorMessage {
  type: "error";
  msg: string;
}

export interface AckMessage {
  type:
    | "step_ack"
    | "mode_ack"
    | "pattern_ack"
    | "record_ack"
    | "play_ack"
    | "seek_ack"
    | "speed_ack";
  [key: string]: unknown;
}

export type ServerMessage =
  | ImpactMessage
  | StepDetectedMessage
  | StateMessage
  | ErrorMessage
  | AckMessage
  | { type: string; [key: string]: unknown };

export function parseServerLine(line: string): ServerMessage | null {
  const trimmed = line.trim();
  if (!trimmed) return null;
  try {
    const value = JSON.parse(trimmed);
    if (value && typeof value === "object" && typeof value.type === "string") {
      return value as ServerMessage;
    }
  } catch {
    // fall through: malformed server line is dropped, not fatal
  }
  return null;
}

// request builders -- everything the UI may send

export function stepRequest(side: SideLetter): string {
  return JSON.stringify({ type: "step", side });
}

export function modeRequest(mode: ModeName): string {
  return JSON.stringify({ type: "mode", mode });
}

export function patternRequest(count: 1 | 2 | 3): string {
  return JSON.stringify({ type: "pattern", count });
}

export function recordRequest(action: "start" | "stop", file?: string): string {
  return JSON.stringify(file ? { type: "record", action, file } : { type: "record", action });
}

export function playRequest(file: string, speed: number): string {
  return JSON.stringify({ type: "play", speed, file });
}

export function seekRequest(tUs: number): string {
  return JSON.stringify({ type: "seek", t_us: tUs });
}

export function speedRequest(speed: number): string {
  return JSON.stringify({ type: "speed", speed });
}

export function stateRequest(): string {
  return JSON.stringify({ type: "state" });
}
