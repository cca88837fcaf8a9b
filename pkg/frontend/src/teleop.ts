// Keyboard teleoperation: arrow keys ramp a wheel-velocity reference,
// space zeroes it. Commands are rate limited well below the control
// rate; inputs while disconnected are discarded (with a flag the UI can
// show).

export interface TeleopCommand {
  value: number; // rad/s wheel-velocity reference
}

export interface TeleopOptions {
  capRadPerSec?: number;     // |reference| ceiling
  rampRadPerSec2?: number;   // growth rate while a key is held
  minSendIntervalMs?: number;
}

export class Teleop {
  private held = new Set<"up" | "down">();
  private value = 0;
  private lastSentValue: number | null = null;
  private lastSendMs = -Infinity;
  private zeroRequested = false;
  discardedWhileDisconnected = 0;
  readonly cap: number;
  readonly ramp: number;
  readonly minSendIntervalMs: number;

  constructor(opts: TeleopOptions = {}) {
    this.cap = opts.capRadPerSec ?? 8.0;
    this.ramp = opts.rampRadPerSec2 ?? 6.0;
    this.minSendIntervalMs = opts.minSendIntervalMs ?? 50;
  }

  /** Returns true when the key is one we handle (callers preventDefault). */
  keyDown(key: string, connected: boolean): boolean {
    const name = this.mapKey(key);
    if (name === null) return false;
    if (!connected) {
      this.discardedWhileDisconnected += 1;
      return true;
    }
    if (name === "space") {
      this.zeroRequested = true;
      this.held.clear();
      this.value = 0;
    } else {
      this.held.add(name);
    }
    return true;
  }

  keyUp(key: string): boolean {
    const name = this.mapKey(key);
    if (name === null || name === "space") return name !== null;
    this.held.delete(name);
    return true;
  }

  private mapKey(key: string): "up" | "down" | "space" | null {
    if (key === "ArrowUp") return "up";
    if (key === "ArrowDown") return "down";
    if (key === " " || key === "Space" || key === "Spacebar") return "space";
    return null;
  }

  get currentValue(): number {
    return this.value;
  }

  /**
   * Advance the ramp and decide whether a command is due.  Call this on
   * a timer with the current wall-clock milliseconds; returns the
   * command to send, or null.
   */
  tick(nowMs: number, dtSeconds: number): TeleopCommand | null {
    const dir = (this.held.has("up") ? 1 : 0) - (this.held.has("down") ? 1 : 0);
    if (dir !== 0) {
      this.value += dir * this.ramp * dtSeconds;
      this.value = Math.max(-this.cap, Math.min(this.cap, this.value));
    }
    if (this.zeroRequested) {
      this.zeroRequested = false;
      this.lastSendMs = nowMs;
      this.lastSentValue = 0;
      this.value = 0;
      return { value: 0 }; // emitted exactly once
    }
    if (dir === 0) return null;
    if (nowMs - this.lastSendMs < this.minSendIntervalMs) return null;
    if (this.lastSentValue !== null && this.lastSentValue === this.value) {
      return null;
    }
    this.lastSendMs = nowMs;
    this.lastSentValue = this.value;
    return { value: this.value };
  }
}
