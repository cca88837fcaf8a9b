// Gain/weight editing with debounce and acknowledged-value tracking.
// The UI shows both the edited (pending) and the acknowledged values;
// only an ack moves the acknowledged display.

export type SendFn = (
  kind: "set_gains" | "set_weights_and_resynthesize",
  payload: Record<string, unknown>,
) => Promise<{ ok: boolean; message?: string; payload?: Record<string, unknown> }>;

export interface TuningResult {
  ok: boolean;
  message?: string;
  gains?: number[];
}

export const DEBOUNCE_MS = 100;

export class TuningPanel {
  /** Values being edited locally (may be unacknowledged). */
  edited: number[] = [];
  /** Last acknowledged gains (display truth). */
  acknowledged: number[] = [];
  inlineError: string | null = null;
  sendsIssued = 0;

  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly send: SendFn,
    private readonly onUpdate: () => void,
    private readonly setTimeoutFn: typeof setTimeout = setTimeout,
    private readonly clearTimeoutFn: typeof clearTimeout = clearTimeout,
  ) {}

  setAcknowledged(gains: number[]): void {
    this.acknowledged = [...gains];
    if (this.edited.length === 0) this.edited = [...gains];
    this.onUpdate();
  }

  /** A slider/input moved: debounce 100 ms, then send set_gains. */
  editGain(index: number, value: number): void {
    if (!Number.isFinite(value)) {
      this.inlineError = "gain must be a number"; // local validation only
      this.onUpdate();
      return;
    }
    this.inlineError = null;
    while (this.edited.length <= index) this.edited.push(0);
    this.edited[index] = value;
    this.onUpdate();
    this.debounce(() => this.flushGains());
  }

  /** Weight edit: debounce, then ask the server to resynthesize. */
  editWeights(qDiag: number[], r: number): void {
    if (!qDiag.every(Number.isFinite) || !Number.isFinite(r) || r <= 0) {
      this.inlineError = "weights must be finite, R > 0";
      this.onUpdate();
      return;
    }
    this.inlineError = null;
    this.onUpdate();
    this.debounce(() => this.flushWeights(qDiag, r));
  }

  private debounce(action: () => void): void {
    if (this.timer !== null) this.clearTimeoutFn(this.timer);
    this.timer = this.setTimeoutFn(() => {
      this.timer = null;
      action();
    }, DEBOUNCE_MS);
  }

  private async flushGains(): Promise<void> {
    this.sendsIssued += 1;
    const reply = await this.send("set_gains", { k: [...this.edited] });
    this.absorb(reply);
  }

  private async flushWeights(qDiag: number[], r: number): Promise<void> {
    this.sendsIssued += 1;
    const reply = await this.send("set_weights_and_resynthesize", {
      Q: qDiag,
      R: r,
    });
    this.absorb(reply);
  }

  private absorb(reply: {
    ok: boolean;
    message?: string;
    payload?: Record<string, unknown>;
  }): void {
    if (!reply.ok) {
      this.inlineError = reply.message ?? "rejected";
      this.edited = [...this.acknowledged]; // revert pending edits
      this.onUpdate();
      return;
    }
    const gains = reply.payload?.["gains"];
    if (Array.isArray(gains)) {
      this.acknowledged = gains.map(Number);
      this.edited = [...this.acknowledged];
    }
    this.inlineError = null;
    this.onUpdate();
  }

  get hasPendingEdits(): boolean {
    return (
      this.edited.length !== this.acknowledged.length ||
      this.edited.some((v, i) => v !== this.acknowledged[i])
    );
  }
}
