// Bounded, time-ordered telemetry store. Memory stays constant however
// long the session runs: old frames fall off the front.

export interface Stamped {
  ts: number;
}

export class RingBuffer<T extends Stamped> {
  private items: (T | undefined)[];
  private head = 0; // next write slot
  private count = 0;
  totalPushed = 0;
  rejectedOutOfOrder = 0;

  constructor(readonly capacity: number = 2000) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
    this.items = new Array(capacity);
  }

  get length(): number {
    return this.count;
  }

  newest(): T | undefined {
    if (this.count === 0) return undefined;
    return this.items[(this.head - 1 + this.capacity) % this.capacity];
  }

  /** Push a frame; drops it (and counts) if it would break time order. */
  push(item: T): boolean {
    const last = this.newest();
    if (last !== undefined && item.ts <= last.ts) {
      this.rejectedOutOfOrder += 1;
      return false;
    }
    this.items[this.head] = item;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) this.count += 1;
    this.totalPushed += 1;
    return true;
  }

  clear(): void {
    this.items = new Array(this.capacity);
    this.head = 0;
    this.count = 0;
  }

  /** All stored frames, oldest first. */
  toArray(): T[] {
    const out: T[] = [];
    const start = (this.head - this.count + this.capacity) % this.capacity;
    for (let i = 0; i < this.count; i++) {
      out.push(this.items[(start + i) % this.capacity] as T);
    }
    return out;
  }

  /** Frames with ts within `seconds` of the newest frame, oldest first. */
  window(seconds: number): T[] {
    const last = this.newest();
    if (last === undefined) return [];
    const cutoff = last.ts - seconds;
    return this.toArray().filter((f) => f.ts >= cutoff);
  }
}
