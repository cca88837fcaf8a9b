// Client-side session state: everything displayed in the UI traces back
// to a telemetry frame or an acknowledgement payload received here.

import {
  CommandKind,
  ControllerInfo,
  Frame,
  SessionHello,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";
import { RingBuffer } from "./ringbuffer.js";
import { Transport, TransportFactory, nextBackoff } from "./transport.js";

export type ConnectionStatus =
  | "connecting"
  | "connected"
  | "reconnecting"
  | "closed";

export interface Counters {
  frames: number;
  malformed: number;
  reconnects: number;
  events: number;
}

export interface SafetyLamps {
  enabled: boolean;
  angle_ok: boolean;
  slip: boolean;
  battery_low: boolean;
}

interface Pending {
  kind: CommandKind;
  resolve: (reply: CommandReply) => void;
  timer: ReturnType<typeof setTimeout>;
}

export interface CommandReply {
  ok: boolean;
  message?: string;
  effectiveTs?: number;
  payload?: Record<string, unknown>;
}

export interface SessionOptions {
  ringCapacity?: number;
  commandTimeoutMs?: number;
  reconnect?: boolean;
  setTimeoutFn?: typeof setTimeout;
}

export class SessionClient {
  status: ConnectionStatus = "connecting";
  readonly frames: RingBuffer<Frame>;
  readonly counters: Counters = {
    frames: 0,
    malformed: 0,
    reconnects: 0,
    events: 0,
  };
  hello: SessionHello | null = null;
  /** Last server-acknowledged controller settings; never local edits. */
  acknowledged: ControllerInfo = { mode: "unknown" };
  lamps: SafetyLamps = {
    enabled: true,
    angle_ok: true,
    slip: false,
    battery_low: false,
  };
  paused = false;
  lastError: string | null = null;
  onChange: (() => void) | null = null;
  onEvent: ((name: string, value: boolean) => void) | null = null;

  private transport: Transport | null = null;
  private seq = 0;
  private pending = new Map<number, Pending>();
  private backoffMs: number | null = null;
  private closedByUser = false;
  private readonly opts: Required<SessionOptions>;

  constructor(
    private readonly url: string,
    private readonly factory: TransportFactory,
    opts: SessionOptions = {},
  ) {
    this.opts = {
      ringCapacity: opts.ringCapacity ?? 2000,
      commandTimeoutMs: opts.commandTimeoutMs ?? 5000,
      reconnect: opts.reconnect ?? true,
      setTimeoutFn: opts.setTimeoutFn ?? setTimeout,
    };
    this.frames = new RingBuffer<Frame>(this.opts.ringCapacity);
    this.open();
  }

  get connected(): boolean {
    return this.status === "connected";
  }

  private open(): void {
    const transport = this.factory(this.url);
    this.transport = transport;
    transport.onOpen = () => {
      this.status = "connected";
      this.backoffMs = null;
      this.notify();
    };
    transport.onMessage = (text) => this.handle(text);
    transport.onClose = () => {
      if (transport !== this.transport) return; // superseded
      this.failPending("connection lost");
      if (this.closedByUser || !this.opts.reconnect) {
        this.status = "closed";
        this.notify();
        return;
      }
      this.status = "reconnecting";
      this.counters.reconnects += 1;
      this.backoffMs = nextBackoff(this.backoffMs);
      this.notify();
      this.opts.setTimeoutFn(() => {
        if (!this.closedByUser) this.open();
      }, this.backoffMs);
    };
  }

  close(): void {
    this.closedByUser = true;
    this.transport?.close();
    this.status = "closed";
    this.failPending("closed");
    this.notify();
  }

  /** Send a command; resolves with its ack or error (or a timeout). */
  send(kind: CommandKind, payload: Record<string, unknown>): Promise<CommandReply> {
    if (!this.connected || this.transport === null) {
      return Promise.resolve({ ok: false, message: "not connected" });
    }
    const seq = ++this.seq;
    const text = encodeCommand(seq, kind, payload);
    return new Promise<CommandReply>((resolve) => {
      const timer = this.opts.setTimeoutFn(() => {
        this.pending.delete(seq);
        resolve({ ok: false, message: "command timed out" });
      }, this.opts.commandTimeoutMs);
      this.pending.set(seq, { kind, resolve, timer });
      this.transport!.send(text);
    });
  }

  private failPending(reason: string): void {
    for (const [, p] of this.pending) {
      clearTimeout(p.timer);
      p.resolve({ ok: false, message: reason });
    }
    this.pending.clear();
  }

  private handle(text: string): void {
    const msg = parseServerMessage(text);
    if (msg === null) {
      this.counters.malformed += 1; // dropped, stream continues
      this.notify();
      return;
    }
    switch (msg.type) {
      case "hello":
        this.hello = msg.hello;
        this.acknowledged = msg.hello.controller;
        this.notify();
        break;
      case "frame":
        if (this.frames.push(msg.frame)) this.counters.frames += 1;
        this.lamps = {
          enabled: msg.frame.safety.enabled,
          angle_ok: msg.frame.safety.angle_ok,
          slip: msg.frame.safety.slip,
          battery_low: msg.frame.safety.battery_low,
        };
        this.notify();
        break;
      case "ack": {
        const p = this.pending.get(msg.inReplyTo);
        if (p !== undefined) {
          this.pending.delete(msg.inReplyTo);
          clearTimeout(p.timer);
          this.absorbAck(p.kind, msg.payload);
          p.resolve({
            ok: true,
            effectiveTs: msg.effectiveTs,
            payload: msg.payload,
          });
        }
        this.notify();
        break;
      }
      case "error": {
        this.lastError = msg.message;
        if (msg.inReplyTo !== null) {
          const p = this.pending.get(msg.inReplyTo);
          if (p !== undefined) {
            this.pending.delete(msg.inReplyTo);
            clearTimeout(p.timer);
            p.resolve({ ok: false, message: msg.message });
          }
        }
        this.notify();
        break;
      }
      case "event":
        this.counters.events += 1;
        this.onEvent?.(msg.name, msg.value);
        this.notify();
        break;
      case "heartbeat":
        this.paused = msg.paused;
        this.notify();
        break;
      case "bye":
        this.transport?.close();
        break;
      case "pong":
        break;
    }
  }

  /** Fold acknowledged settings into the displayed controller state. */
  private absorbAck(
    kind: CommandKind,
    payload: Record<string, unknown> | undefined,
  ): void {
    const ctl: ControllerInfo = { ...this.acknowledged };
    if (kind === "set_gains" || kind === "set_weights_and_resynthesize") {
      const gains = payload?.["gains"];
      if (Array.isArray(gains)) ctl.gains = gains.map(Number);
    } else if (kind === "set_mode") {
      const mode = payload?.["mode"];
      if (typeof mode === "string") ctl.mode = mode;
    } else if (kind === "set_reference" && payload !== undefined) {
      for (const key of ["p_ref", "theta_ref", "phi_dot_ref"] as const) {
        if (typeof payload[key] === "number") ctl[key] = payload[key] as number;
      }
    }
    this.acknowledged = ctl;
  }

  private notify(): void {
    this.onChange?.();
  }
}
