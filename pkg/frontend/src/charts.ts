// Canvas strip charts. No chart library: a telemetry trace is a
// polyline over a time window with autoscaled vertical range.

import { Frame } from "./protocol.js";
import { RingBuffer } from "./ringbuffer.js";

export interface TraceSpec {
  label: string;
  color: string;
  pick: (f: Frame) => number;
}

export class StripChart {
  private ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly traces: TraceSpec[],
    private readonly unit: string,
  ) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  render(frames: Frame[], windowSeconds: number): void {
    const { ctx } = this;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, w, h);
    if (frames.length < 2) return;

    const tEnd = frames[frames.length - 1].ts;
    const tStart = tEnd - windowSeconds;
    let lo = Infinity;
    let hi = -Infinity;
    for (const f of frames) {
      for (const tr of this.traces) {
        const v = tr.pick(f);
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    if (!Number.isFinite(lo) || !Number.isFinite(hi)) return;
    if (hi - lo < 1e-9) {
      hi += 0.5;
      lo -= 0.5;
    }
    const pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;

    const x = (t: number) => ((t - tStart) / (tEnd - tStart)) * (w - 8) + 4;
    const y = (v: number) => h - ((v - lo) / (hi - lo)) * (h - 18) - 4;

    // zero line
    if (lo < 0 && hi > 0) {
      ctx.strokeStyle = "#2a3342";
      ctx.beginPath();
      ctx.moveTo(0, y(0));
      ctx.lineTo(w, y(0));
      ctx.stroke();
    }

    for (const tr of this.traces) {
      ctx.strokeStyle = tr.color;
      ctx.lineWidth = 1.4;
      ctx.beginPath();
      let started = false;
      for (const f of frames) {
        if (f.ts < tStart) continue;
        const v = tr.pick(f);
        if (!Number.isFinite(v)) {
          started = false; // gap in the trace
          continue;
        }
        if (started) ctx.lineTo(x(f.ts), y(v));
        else {
          ctx.moveTo(x(f.ts), y(v));
          started = true;
        }
      }
      ctx.stroke();
    }

    ctx.fillStyle = "#8ea0b8";
    ctx.font = "10px system-ui, sans-serif";
    const labels = this.traces.map((t) => t.label).join("  ");
    ctx.fillText(`${labels} [${this.unit}]`, 6, 12);
    ctx.fillText(hi.toPrecision(3), w - 48, 12);
    ctx.fillText(lo.toPrecision(3), w - 48, h - 6);
  }
}

/** Everything the chart column needs per animation tick. */
export function renderCharts(
  charts: StripChart[],
  buffer: RingBuffer<Frame>,
  windowSeconds: number,
): void {
  const frames = buffer.window(windowSeconds);
  for (const chart of charts) chart.render(frames, windowSeconds);
}
