// End-to-end against a real node: spawns `python3 -m solefultap.cli run`
// and drives the control channel over TCP (same lines the websocket
// carries). Verifies the two UI acceptance properties:
//   * pattern=3, one step -> exactly 3 flashes in F,B,F order, and the
//     ticker count equals the node's impact-line count over a 50-step
//     scripted session;
//   * attaching a passive UI client does not change what the node does.

import { spawn, type ChildProcess } from "node:child_process";
import net from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { parseServerLine, type ServerMessage } from "../src/protocol.js";
import { UiState, cellKey } from "../src/state.js";

const PYTHON = process.env.SOLEFULTAP_PYTHON ?? "python3";

function startNode(): Promise<{ proc: ChildProcess; port: number }> {
  return new Promise((resolve, reject) => {
    const proc = spawn(PYTHON, ["-m", "solefultap.cli", "run", "--mode", "solo",
                                "--control", "0"],
                       { stdio: ["ignore", "pipe", "pipe"] });
    let out = "";
    const onData = (chunk: Buffer) => {
      out += chunk.toString();
      const match = out.match(/control port (\d+)/);
      if (match) {
        proc.stdout!.off("data", onData);
        resolve({ proc, port: Number(match[1]) });
      }
    };
    proc.stdout!.on("data", onData);
    proc.on("error", reject);
    proc.on("exit", (code) => reject(new Error(`node exited early: ${code}`)));
    setTimeout(() => reject(new Error("node did not start")), 10_000);
  });
}

class LineClient {
  private buf = "";
  readonly messages: ServerMessage[] = [];
  private sock: net.Socket;

  constructor(port: number, private sink?: (msg: ServerMessage) => void) {
    this.sock = net.createConnection({ host: "127.0.0.1", port });
    this.sock.on("data", (chunk) => {
      this.buf += chunk.toString("utf-8");
      let nl;
      while ((nl = this.buf.indexOf("\n")) >= 0) {
        const line = this.buf.slice(0, nl);
        this.buf = this.buf.slice(nl + 1);
        const msg = parseServerLine(line);
        if (msg) {
          this.messages.push(msg);
          this.sink?.(msg);
        }
      }
    });
  }

  ready(): Promise<void> {
    return new Promise((resolve, reject) => {
      this.sock.once("connect", resolve);
      this.sock.once("error", reject);
    });
  }

  send(line: string): void {
    this.sock.write(line + "\n");
  }

  async waitFor(predicate: () => boolean, timeoutMs = 15_000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (!predicate()) {
      if (Date.now() > deadline) throw new Error("timed out waiting");
      await new Promise((r) => setTimeout(r, 20));
    }
  }

  close(): void {
    this.sock.destroy();
  }
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

function impactShape(messages: ServerMessage[]): string[] {
  return messages
    .filter((m) => m.type === "impact")
    .map((m) => `${(m as { side: string }).side}/${(m as { pos: string }).pos}`);
}

async function scriptedSession(
  port: number,
  steps: number,
  attachUi: boolean,
  paceMs: number,
): Promise<{ driverShape: string[]; ui: UiState | null }> {
  let ui: UiState | null = null;
  let uiClient: LineClient | null = null;
  if (attachUi) {
    ui = new UiState();
    const state = ui;
    uiClient = new LineClient(port, (msg) => state.apply(msg, Date.now()));
    await uiClient.ready();
    uiClient.send('{"type":"state"}'); // what the UI does on connect
  }
  const driver = new LineClient(port);
  await driver.ready();
  driver.send('{"type":"pattern","count":3}');
  await driver.waitFor(() =>
    driver.messages.some((m) => m.type === "pattern_ack"),
  );
  for (let i = 0; i < steps; i++) {
    driver.send('{"type":"step","side":"R"}');
    await sleep(paceMs);
  }
  await driver.waitFor(
    () => impactShape(driver.messages).length >= steps * 3,
  );
  await sleep(150); // drain any stragglers
  if (uiClient) {
    await new Promise((r) => setTimeout(r, 100));
    uiClient.close();
  }
  const driverShape = impactShape(driver.messages);
  driver.close();
  return { driverShape, ui };
}

describe("against a live node", () => {
  let proc: ChildProcess;
  let port: number;

  beforeAll(async () => {
    ({ proc, port } = await startNode());
  }, 20_000);

  afterAll(() => {
    proc.kill("SIGINT");
  });

  it(
    "one step at pattern 3 flashes F,B,F and the ticker matches the node",
    async () => {
      const ui = new UiState();
      const flashes: string[] = [];
      const client = new LineClient(port, (msg) => {
        ui.apply(msg, Date.now());
        if (msg.type === "impact") {
          flashes.push(String((msg as { pos: string }).pos));
        }
      });
      await client.ready();
      client.send('{"type":"pattern","count":3}');
      await client.waitFor(() =>
        client.messages.some((m) => m.type === "pattern_ack"),
      );
      client.send('{"type":"step","side":"R"}');
      await client.waitFor(() => ui.impactCount >= 3);
      expect(flashes).toEqual(["front", "back", "front"]);
      expect(ui.impactCount).toBe(3);
      // the third impact landed just now: its cell is mid-flash
      expect(ui.flashLevel(cellKey("R", "front"), Date.now())).toBeGreaterThan(0);
      client.close();
    },
    30_000,
  );

  it(
    "50-step session: ticker count equals the node's impact line count",
    async () => {
      // fast pacing overlaps patterns on purpose; only totals matter here
      const session = await scriptedSession(port, 50, true, 70);
      expect(session.ui).not.toBeNull();
      expect(session.driverShape.length).toBe(150);
      expect(session.ui!.impactCount).toBe(session.driverShape.length);
    },
    60_000,
  );

  it(
    "UI statelessness: identical node output with and without a UI attached",
    async () => {
      // paced beyond the 180 ms pattern span so the impact order is
      // deterministic and two sessions are comparable line for line
      const withUi = await scriptedSession(port, 12, true, 220);
      const withoutUi = await scriptedSession(port, 12, false, 220);
      const expected = Array(12).fill(["R/front", "R/back", "R/front"]).flat();
      expect(withUi.driverShape).toEqual(expected);
      expect(withoutUi.driverShape).toEqual(expected);
      expect(withoutUi.driverShape).toEqual(withUi.driverShape);
    },
    60_000,
  );
});
