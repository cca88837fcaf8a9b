// Animated side view of the robot: a wheel at position p and the body
// pitched by theta. Purely presentational -- it draws exactly what the
// latest telemetry frame says, no client-side physics.

import { Frame } from "./protocol.js";

export class RobotView {
  private ctx: CanvasRenderingContext2D;
  // Drawing constants (meters -> pixels).
  private readonly scale = 600;
  private readonly wheelRadius = 0.04;
  private readonly bodyLength = 0.17;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  render(frame: Frame | undefined, enabled: boolean): void {
    const { ctx } = this;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, w, h);

    const groundY = h - 30;
    ctx.strokeStyle = "#3a4556";
    ctx.beginPath();
    ctx.moveTo(0, groundY);
    ctx.lineTo(w, groundY);
    ctx.stroke();
    // ground ticks every 0.1 m, scrolling with p
    const p = frame?.p ?? 0;
    ctx.fillStyle = "#3a4556";
    const tickSpacing = 0.1 * this.scale;
    const offset = ((-p * this.scale) % tickSpacing + tickSpacing) % tickSpacing;
    for (let x = offset; x < w; x += tickSpacing) {
      ctx.fillRect(x, groundY, 2, 5);
    }

    const cx = w / 2;
    const r = this.wheelRadius * this.scale;
    const wheelY = groundY - r;

    // wheel with a spoke showing rotation phi + theta (ground-relative)
    ctx.strokeStyle = enabled ? "#9fb4d0" : "#6b4c4c";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.arc(cx, wheelY, r, 0, 2 * Math.PI);
    ctx.stroke();
    const wheelAngle = (frame?.phi ?? 0) + (frame?.theta ?? 0);
    ctx.beginPath();
    ctx.moveTo(cx, wheelY);
    ctx.lineTo(
      cx + r * Math.sin(wheelAngle),
      wheelY - r * Math.cos(wheelAngle),
    );
    ctx.stroke();

    // body: a line of length bodyLength pitched by theta from vertical
    const theta = frame?.theta ?? 0;
    const bl = this.bodyLength * this.scale;
    const tipX = cx + bl * Math.sin(theta);
    const tipY = wheelY - bl * Math.cos(theta);
    ctx.strokeStyle = enabled ? "#62d0a6" : "#d06262";
    ctx.lineWidth = 6;
    ctx.beginPath();
    ctx.moveTo(cx, wheelY);
    ctx.lineTo(tipX, tipY);
    ctx.stroke();
    // battery box near the top of the body
    ctx.save();
    ctx.translate(tipX, tipY);
    ctx.rotate(theta);
    ctx.fillStyle = "#2d3848";
    ctx.fillRect(-14, -6, 28, 16);
    ctx.restore();

    ctx.fillStyle = "#8ea0b8";
    ctx.font = "11px system-ui, sans-serif";
    const deg = ((theta * 180) / Math.PI).toFixed(1);
    ctx.fillText(`theta ${deg} deg   p ${p.toFixed(3)} m`, 8, 14);
  }
}
