// Click synthesis. Clicks are triggered by node "impact" messages at
// arrival, never locally predicted, so what you hear tracks the actual
// scheduler output including deferrals.

export interface ClickSink {
  click(pos: "front" | "back"): void;
}

const FRONT_HZ = 1100;
const BACK_HZ = 800;
const CLICK_S = 0.04;

export class WebAudioClicks implements ClickSink {
  private ctx: AudioContext | null = null;

  private ensure(): AudioContext | null {
    if (typeof AudioContext === "undefined") return null;
    if (!this.ctx) this.ctx = new AudioContext();
    if (this.ctx.state === "suspended") void this.ctx.resume();
    return this.ctx;
  }

  click(pos: "front" | "back"): void {
    const ctx = this.ensure();
    if (!ctx) return;
    const osc = ctx.createOscillator();
    const gain = ctx.createGain();
    osc.connect(gain);
    gain.connect(ctx.destination);
    osc.type = "square";
    osc.frequency.value = pos === "front" ? FRONT_HZ : BACK_HZ;
    const now = ctx.currentTime;
    gain.gain.setValueAtTime(0.25, now);
    gain.gain.exponentialRampToValueAtTime(0.001, now + CLICK_S);
    osc.start(now);
    osc.stop(now + CLICK_S);
  }
}

export class SilentClicks implements ClickSink {
  clicks: Array<"front" | "back"> = [];
  click(pos: "front" | "back"): void {
    this.clicks.push(pos);
  }
}
