// Message schema of the robot session server (see docs/protocol.md).
// One JSON object per WebSocket text frame / per line on raw TCP.

export interface SafetyFlags {
  enabled: boolean;
  angle_ok: boolean;
  slip: boolean;
  battery_low: boolean;
  delta_p_ddot: number;
}

export interface Frame {
  ts: number;
  phi: number;
  phiDot: number;
  theta: number;
  thetaDot: number;
  p: number;
  u: number;
  torque: number;
  thetaEst: number;
  safety: SafetyFlags;
}

export interface ControllerInfo {
  mode: string;
  gains?: number[];
  states?: string[];
  kp_pos?: number;
  p_ref?: number;
  theta_ref?: number;
  phi_dot_ref?: number;
}

export interface SessionHello {
  sessionId: number;
  timeScale: number;
  telemetryRate: number;
  controller: ControllerInfo;
  params: Record<string, number>;
}

export type ServerMessage =
  | { type: "hello"; hello: SessionHello }
  | { type: "frame"; frame: Frame }
  | { type: "ack"; inReplyTo: number; kind: string; effectiveTs: number; payload?: Record<string, unknown> }
  | { type: "error"; inReplyTo: number | null; message: string }
  | { type: "event"; ts: number; name: string; value: boolean }
  | { type: "heartbeat"; ts: number; paused: boolean }
  | { type: "pong" }
  | { type: "bye" };

const isNum = (v: unknown): v is number =>
  typeof v === "number" && Number.isFinite(v);

/** Parse one wire message; returns null for anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: any;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  switch (msg.type) {
    case "frame": {
      const s = msg.state, f = msg.safety;
      if (!s || !f) return null;
      if (![msg.ts, s.phi, s.phi_dot, s.theta, s.theta_dot, msg.p, msg.u,
            msg.torque, msg.theta_est, f.delta_p_ddot].every(isNum)) {
        return null;
      }
      return {
        type: "frame",
        frame: {
          ts: msg.ts, phi: s.phi, phiDot: s.phi_dot, theta: s.theta,
          thetaDot: s.theta_dot, p: msg.p, u: msg.u, torque: msg.torque,
          thetaEst: msg.theta_est,
          safety: {
            enabled: !!f.enabled, angle_ok: !!f.angle_ok, slip: !!f.slip,
            battery_low: !!f.battery_low, delta_p_ddot: f.delta_p_ddot,
          },
        },
      };
    }
    case "hello": {
      const s = msg.session;
      if (!s || !isNum(s.session_id)) return null;
      return {
        type: "hello",
        hello: {
          sessionId: s.session_id,
          timeScale: s.time_scale,
          telemetryRate: s.telemetry_rate,
          controller: s.controller ?? { mode: "unknown" },
          params: s.params ?? {},
        },
      };
    }
    case "ack":
      if (!isNum(msg.effective_ts)) return null;
      return {
        type: "ack",
        inReplyTo: isNum(msg.in_reply_to) ? msg.in_reply_to : -1,
        kind: String(msg.kind ?? ""),
        effectiveTs: msg.effective_ts,
        payload: msg.payload,
      };
    case "error":
      return {
        type: "error",
        inReplyTo: isNum(msg.in_reply_to) ? msg.in_reply_to : null,
        message: String(msg.message ?? "unknown error"),
      };
    case "event":
      if (!isNum(msg.ts) || typeof msg.name !== "string") return null;
      return { type: "event", ts: msg.ts, name: msg.name, value: !!msg.value };
    case "heartbeat":
      if (!isNum(msg.ts)) return null;
      return { type: "heartbeat", ts: msg.ts, paused: !!msg.paused };
    case "pong":
      return { type: "pong" };
    case "bye":
      return { type: "bye" };
    default:
      return null;
  }
}

export type CommandKind =
  | "set_gains"
  | "set_weights_and_resynthesize"
  | "set_reference"
  | "teleop_velocity"
  | "set_mode"
  | "pause"
  | "resume"
  | "reset"
  | "set_sim_option";

export function encodeCommand(
  seq: number,
  kind: CommandKind,
  payload: Record<string, unknown>,
): string {
  return JSON.stringify({ type: "command", seq, ts: 0, kind, payload });
}
