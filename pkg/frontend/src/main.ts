// DOM wiring: one tile (clickable halves), keyboard steps, transport
// controls, the event ticker, and a frame-tick render loop over UiState.

import { SilentClicks, WebAudioClicks, type ClickSink } from "./audio.js";
import { ControlClient } from "./client.js";
import * as proto from "./protocol.js";
import { ALL_CELLS, UiState, type CellKey } from "./state.js";

function nodeUrl(): string {
  const params = new URLSearchParams(location.search);
  const override = params.get("node");
  if (override) return `ws://${override}/`;
  if (location.host) return `ws://${location.host}/`;
  return "ws://127.0.0.1:7340/";
}

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

const state = new UiState();
const clicks: ClickSink =
  typeof AudioContext === "undefined" ? new SilentClicks() : new WebAudioClicks();

state.onMessage((msg) => {
  if (msg.type === "impact") {
    clicks.click(msg.pos as "front" | "back");
  }
});

const client = new ControlClient(nodeUrl(), {
  onMessage: (msg) => state.apply(msg, performance.now()),
  onStatus: (status) => {
    state.setConnection(status);
    if (status === "connected") {
      client.send(proto.stateRequest()); // re-sync after (re)connect
    }
  },
});

function sendStep(side: "L" | "R"): void {
  if (state.connection === "connected") {
    client.send(proto.stepRequest(side));
  }
}

function wireControls(): void {
  el<HTMLDivElement>("half-L").addEventListener("click", () => sendStep("L"));
  el<HTMLDivElement>("half-R").addEventListener("click", () => sendStep("R"));
  document.addEventListener("keydown", (event) => {
    if (event.repeat) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) return;
    if (event.key === "f" || event.key === "F") sendStep("L");
    if (event.key === "j" || event.key === "J") sendStep("R");
  });

  el<HTMLSelectElement>("mode").addEventListener("change", (event) => {
    const mode = (event.target as HTMLSelectElement).value as proto.ModeName;
    client.send(proto.modeRequest(mode));
  });
  el<HTMLSelectElement>("pattern").addEventListener("change", (event) => {
    const count = Number((event.target as HTMLSelectElement).value) as 1 | 2 | 3;
    client.send(proto.patternRequest(count));
  });

  el<HTMLButtonElement>("record").addEventListener("click", () => {
    if (state.recording) {
      const file = el<HTMLInputElement>("rec-file").value.trim();
      client.send(proto.recordRequest("stop", file || undefined));
    } else {
      client.send(proto.recordRequest("start"));
    }
  });
  el<HTMLButtonElement>("play").addEventListener("click", () => {
    const file = el<HTMLInputElement>("rec-file").value.trim();
    if (file) {
      client.send(proto.playRequest(file, state.speed));
    }
  });
  el<HTMLButtonElement>("rewind").addEventListener("click", () => {
    client.send(proto.seekRequest(0));
  });
  el<HTMLInputElement>("speed").addEventListener("input", (event) => {
    const speed = Number((event.target as HTMLInputElement).value);
    el<HTMLSpanElement>("speed-label").textContent = `${speed.toFixed(2)}x`;
    client.send(proto.speedRequest(speed));
  });
}

const cellElements = new Map<CellKey, HTMLElement>();
let renderedTickerSeq = -1;

function render(): void {
  const now = performance.now();
  for (const cell of ALL_CELLS) {
    const node = cellElements.get(cell);
    if (!node) continue;
    const level = state.flashLevel(cell, now);
    node.style.setProperty("--flash", level.toFixed(3));
    node.classList.toggle("lit", level > 0);
  }

  el<HTMLSpanElement>("status").dataset.state = state.connection;
  el<HTMLSpanElement>("status").textContent = state.connection;
  el<HTMLSpanElement>("impact-count").textContent = String(state.impactCount);
  const modeSelect = el<HTMLSelectElement>("mode");
  if (modeSelect.value !== state.mode && state.mode !== "?") {
    modeSelect.value = state.mode;
  }
  const patternSelect = el<HTMLSelectElement>("pattern");
  if (state.pattern && patternSelect.value !== String(state.pattern)) {
    patternSelect.value = String(state.pattern);
  }
  el<HTMLButtonElement>("record").textContent = state.recording
    ? "stop recording"
    : "record";
  el<HTMLSpanElement>("transport-state").textContent = state.playing
    ? `playing ${state.speed}x`
    : "idle";
  el<HTMLSpanElement>("last-error").textContent = state.lastError;

  const latest = state.ticker.length
    ? state.ticker[state.ticker.length - 1].seq
    : -1;
  if (latest !== renderedTickerSeq) {
    renderedTickerSeq = latest;
    const list = el<HTMLUListElement>("ticker");
    list.replaceChildren(
      ...state.ticker
        .slice(-30)
        .reverse()
        .map((entry) => {
          const item = document.createElement("li");
          item.textContent = `#${entry.seq} ${entry.text}`;
          return item;
        }),
    );
  }
  requestAnimationFrame(render);
}

function boot(): void {
  for (const cell of ALL_CELLS) {
    const [side, pos] = cell.split(":");
    cellElements.set(cell, el(`cell-${side}-${pos}`));
  }
  wireControls();
  client.start();
  requestAnimationFrame(render);
}

boot();
