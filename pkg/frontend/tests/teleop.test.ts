import { describe, expect, it } from "vitest";

import { Teleop } from "../src/teleop.js";

describe("Teleop", () => {
  it("ramps monotonically up to the cap while ArrowUp is held", () => {
    const t = new Teleop({ capRadPerSec: 4, rampRadPerSec2: 8 });
    t.keyDown("ArrowUp", true);
    const values: number[] = [];
    let now = 0;
    for (let i = 0; i < 40; i++) {
      now += 100;
      const cmd = t.tick(now, 0.1);
      if (cmd !== null) values.push(cmd.value);
    }
    expect(values.length).toBeGreaterThan(3);
    for (let i = 1; i < values.length; i++) {
      expect(values[i]).toBeGreaterThanOrEqual(values[i - 1]);
    }
    expect(Math.max(...values)).toBeCloseTo(4); // capped
  });

  it("space emits a single zero command", () => {
    const t = new Teleop();
    t.keyDown("ArrowUp", true);
    t.tick(100, 0.1);
    t.keyDown(" ", true);
    const cmd = t.tick(200, 0.1);
    expect(cmd).toEqual({ value: 0 });
    // nothing further without new input
    expect(t.tick(300, 0.1)).toBeNull();
    expect(t.tick(400, 0.1)).toBeNull();
  });

  it("rate limits resends while holding", () => {
    const t = new Teleop({ minSendIntervalMs: 50 });
    t.keyDown("ArrowDown", true);
    let sends = 0;
    for (let ms = 0; ms <= 1000; ms += 5) {
      if (t.tick(ms, 0.005) !== null) sends += 1;
    }
    expect(sends).toBeLessThanOrEqual(21); // <= 1/50ms over one second
    expect(sends).toBeGreaterThan(10);
  });

  it("discards input while disconnected and counts it", () => {
    const t = new Teleop();
    expect(t.keyDown("ArrowUp", false)).toBe(true);
    expect(t.discardedWhileDisconnected).toBe(1);
    expect(t.tick(100, 0.1)).toBeNull();
  });

  it("ignores unrelated keys", () => {
    const t = new Teleop();
    expect(t.keyDown("a", true)).toBe(false);
    expect(t.keyUp("Escape")).toBe(false);
  });

  it("keyup stops the ramp", () => {
    const t = new Teleop({ rampRadPerSec2: 10 });
    t.keyDown("ArrowUp", true);
    t.tick(100, 0.1);
    const v1 = t.currentValue;
    t.keyUp("ArrowUp");
    t.tick(200, 0.1);
    expect(t.currentValue).toBe(v1); // held steady, no further sends
    expect(t.tick(300, 0.1)).toBeNull();
  });
});
