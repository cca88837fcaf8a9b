"""Live session server: drive and tune the simulated robot in real time.

A session wraps one Simulator and runs it paced to the wall clock (scaled
by a time factor; 0 = paused).  Connection handlers never touch the
simulation directly: commands travel through an ordered queue and are
applied between control steps, telemetry fans out through bounded
per-subscriber buffers that drop their oldest frames when a consumer
stalls.  The simulation loop therefore never blocks on the network.

Wire protocol (see docs/protocol.md): JSON objects with `type`, `seq` and
`ts` fields, one per line on the plain TCP listener and one per text
frame on the WebSocket listener ("one protocol, two framings").  The
WebSocket port also serves the static browser UI.
"""

from __future__ import annotations

import asyncio
import base64
import collections
import dataclasses
import hashlib
import itertools
import json
import math
import mimetypes
from dataclasses import dataclass
from pathlib import Path

from . import synthesis
from .errors import BalbotError, InvalidInputError, ProtocolError, SessionLimitError
from .model import PlantState, RobotParams, linearize
from .simulation import (ControllerConfig, SimConfig, Simulator,
                         TelemetryFrame)
from .synthesis import BALANCE_STATE_LABELS, GainVector, LQRWeights

PROTOCOL_VERSION = 1
DEFAULT_TELEMETRY_RATE = 50.0      # Hz
DEFAULT_MAX_SESSIONS = 8
HEARTBEAT_PERIOD = 1.0             # s, wall clock
SUBSCRIBER_BUFFER_FRAMES = 256
COMMAND_KINDS = ("set_gains", "set_weights_and_resynthesize",
                 "set_reference", "teleop_velocity", "set_mode",
                 "pause", "resume", "reset", "set_sim_option")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


@dataclass(frozen=True)
class SessionInfo:
    """Static description of a running session, sent in `hello` messages."""

    session_id: int
    time_scale: float
    telemetry_rate: float
    controller: dict
    params: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _controller_summary(ctl: ControllerConfig) -> dict:
    d = {"mode": ctl.mode, "kp_pos": ctl.kp_pos, "p_ref": ctl.p_ref,
         "theta_ref": ctl.theta_ref, "phi_dot_ref": ctl.phi_dot_ref}
    if ctl.gains is not None:
        d["gains"] = list(ctl.gains.k)
        d["states"] = list(ctl.gains.states)
        d["convention"] = ctl.gains.convention
    return d


def frame_to_message(frame: TelemetryFrame, seq: int) -> dict:
    s = frame.state
    return {
        "type": "frame", "seq": seq, "ts": frame.t,
        "state": {"phi": s.phi, "phi_dot": s.phi_dot,
                  "theta": s.theta, "theta_dot": s.theta_dot},
        "p": frame.p, "u": frame.u, "torque": frame.torque,
        "theta_est": frame.theta_est,
        "safety": {"enabled": frame.safety.motors_enabled,
                   "angle_ok": frame.safety.angle_ok,
                   "slip": frame.safety.slip_detected,
                   "battery_low": frame.safety.battery_low,
                   "delta_p_ddot": frame.safety.delta_p_ddot},
    }


class Outbox:
    """Per-connection send buffer.

    Control traffic (hello/ack/error/event/bye) is never dropped;
    telemetry frames beyond the buffer bound displace the oldest queued
    frame so a stalled reader can never hold the simulation back.
    """

    def __init__(self, max_frames: int = SUBSCRIBER_BUFFER_FRAMES):
        self.max_frames = max_frames
        self._items: collections.deque = collections.deque()
        self._frames = 0
        self._ready = asyncio.Event()
        self.dropped = 0
        self.closed = False

    def put(self, message: dict, droppable: bool = False) -> None:
        if self.closed:
            return
        if droppable and self._frames >= self.max_frames:
            for i, (msg, drop) in enumerate(self._items):
                if drop:
                    del self._items[i]
                    self._frames -= 1
                    self.dropped += 1
                    break
        self._items.append((message, droppable))
        if droppable:
            self._frames += 1
        self._ready.set()

    def close(self) -> None:
        self.closed = True
        self._ready.set()

    async def get(self) -> dict | None:
        while not self._items:
            if self.closed:
                return None
            self._ready.clear()
            await self._ready.wait()
        message, droppable = self._items.popleft()
        if droppable:
            self._frames -= 1
        return message


class Session:
    """One simulation execution context plus its command/telemetry plumbing."""

    def __init__(self, session_id: int, config: SimConfig,
                 params: RobotParams,
                 telemetry_rate: float = DEFAULT_TELEMETRY_RATE,
                 time_scale: float = 1.0):
        control_rate = 1.0 / config.dt_control
        if telemetry_rate <= 0.0 or telemetry_rate > control_rate + 1e-9:
            raise InvalidInputError(
                f"telemetry rate must be in (0, {control_rate:g}] Hz")
        if time_scale < 0.0:
            raise InvalidInputError("time scale must be >= 0")
        self.session_id = session_id
        self.params = params
        self.sim = Simulator(config, params)
        self.telemetry_rate = telemetry_rate
        self.time_scale = time_scale
        self._resume_scale = time_scale if time_scale > 0.0 else 1.0
        self._teleop_velocity = 0.0
        self._commands: asyncio.Queue = asyncio.Queue()
        self._subscribers: list[Outbox] = []
        self._seq = itertools.count()
        self._prev_safety = None
        self._task: asyncio.Task | None = None
        self.closed = False
        self._linear_model = linearize(params)

    # -- public surface -----------------------------------------------------

    def info(self) -> SessionInfo:
        return SessionInfo(
            session_id=self.session_id,
            time_scale=self.time_scale,
            telemetry_rate=self.telemetry_rate,
            controller=_controller_summary(self.sim.controller),
            params={"m": self.params.m, "r": self.params.r,
                    "l": self.params.l, "g": self.params.g,
                    "K": self.params.K, "t_EM": self.params.t_em})

    def subscribe(self) -> Outbox:
        box = Outbox()
        self.attach_subscriber(box)
        return box

    def attach_subscriber(self, box: Outbox) -> None:
        if box not in self._subscribers:
            self._subscribers.append(box)

    def detach_subscriber(self, box: Outbox) -> None:
        """Stop feeding the box without closing it (it may move on)."""
        if box in self._subscribers:
            self._subscribers.remove(box)

    def unsubscribe(self, box: Outbox) -> None:
        box.close()
        self.detach_subscriber(box)

    async def submit(self, kind: str, payload: dict) -> dict:
        """Queue a command; resolves to its ack/error reply."""
        if self.closed:
            raise ProtocolError("session is closed")
        future = asyncio.get_running_loop().create_future()
        await self._commands.put((kind, payload, future))
        return await future

    def start(self) -> None:
        self._task = asyncio.get_running_loop().create_task(self._run())

    async def close(self) -> None:
        self.closed = True
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except (asyncio.CancelledError, Exception):
                pass
        self._broadcast({"type": "bye", "seq": next(self._seq),
                         "ts": self.sim.t}, droppable=False)
        for box in list(self._subscribers):
            self.unsubscribe(box)

    # -- internals ------------------------------------------------------------

    def _broadcast(self, message: dict, droppable: bool) -> None:
        for box in self._subscribers:
            box.put(message, droppable)

    def _emit_safety_events(self, frame: TelemetryFrame) -> None:
        current = frame.safety
        prev = self._prev_safety
        self._prev_safety = current
        if prev is None:
            return
        for name, before, now in (
                ("motors_enabled", prev.motors_enabled, current.motors_enabled),
                ("angle_ok", prev.angle_ok, current.angle_ok),
                ("slip_detected", prev.slip_detected, current.slip_detected),
                ("battery_low", prev.battery_low, current.battery_low)):
            if before != now:
                self._broadcast({"type": "event", "seq": next(self._seq),
                                 "ts": frame.t, "name": name, "value": now},
                                droppable=False)

    def _drain_commands(self) -> None:
        while True:
            try:
                kind, payload, future = self._commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            try:
                ack = self._apply(kind, payload)
            except BalbotError as exc:
                ack = {"type": "error", "seq": next(self._seq),
                       "ts": self.sim.t, "kind": kind, "message": str(exc)}
            if not future.done():
                future.set_result(ack)

    def _ack(self, kind: str, extra: dict | None = None) -> dict:
        ack = {"type": "ack", "seq": next(self._seq), "ts": self.sim.t,
               "kind": kind, "effective_ts": self.sim.t}
        if extra:
            ack["payload"] = extra
        return ack

    def _apply(self, kind: str, payload: dict) -> dict:
        """Validate and apply one command; rejected commands change nothing."""
        if not isinstance(payload, dict):
            raise ProtocolError("payload must be an object")
        if kind == "set_gains":
            gains = self._parse_gains(payload.get("k"))
            ctl = self.sim.controller
            expected = {"lqr4": 4, "cascade": 3}.get(ctl.mode)
            if expected is None:
                raise ProtocolError(
                    f"mode {ctl.mode!r} takes no gain vector")
            if len(gains.k) != expected:
                raise ProtocolError(
                    f"mode {ctl.mode!r} needs {expected} gains, "
                    f"got {len(gains.k)}")
            self.sim.controller = dataclasses.replace(ctl, gains=gains)
            return self._ack(kind, {"gains": list(gains.k)})
        if kind == "set_weights_and_resynthesize":
            weights = self._parse_weights(payload)
            gains = synthesis.lqr(self._linear_model, weights)
            ctl = self.sim.controller
            expected = {"lqr4": 4, "cascade": 3}.get(ctl.mode)
            if expected != len(gains.k):
                raise ProtocolError(
                    f"{len(gains.k)} weights do not fit mode {ctl.mode!r}")
            self.sim.controller = dataclasses.replace(ctl, gains=gains)
            return self._ack(kind, {"gains": list(gains.k),
                                    "Q": list(weights.q_diag),
                                    "R": weights.r})
        if kind == "set_reference":
            ctl = self.sim.controller
            updates = {}
            for key in ("p_ref", "theta_ref", "phi_dot_ref"):
                if key in payload:
                    updates[key] = _number(payload[key], key)
            if not updates:
                raise ProtocolError("set_reference carries no reference")
            self.sim.controller = dataclasses.replace(ctl, **updates)
            return self._ack(kind, updates)
        if kind == "teleop_velocity":
            value = _number(payload.get("value"), "value")
            ctl = self.sim.controller
            if ctl.mode == "velocity_ref":
                self.sim.controller = dataclasses.replace(
                    ctl, phi_dot_ref=value)
            else:
                # Balancing modes: drive the position reference at the
                # equivalent ground speed r * value.
                self._teleop_velocity = value
            return self._ack(kind, {"value": value})
        if kind == "set_mode":
            return self._apply_set_mode(payload)
        if kind == "pause":
            if self.time_scale > 0.0:
                self._resume_scale = self.time_scale
            self.time_scale = 0.0
            return self._ack(kind)
        if kind == "resume":
            self.time_scale = self._resume_scale
            return self._ack(kind, {"time_scale": self.time_scale})
        if kind == "reset":
            return self._apply_reset(payload)
        if kind == "set_sim_option":
            return self._apply_sim_option(payload)
        raise ProtocolError(f"unknown command kind {kind!r}")

    def _apply_set_mode(self, payload: dict) -> dict:
        mode = payload.get("mode")
        if mode not in ("lqr4", "cascade", "velocity_ref"):
            raise ProtocolError(f"unknown controller mode {mode!r}")
        ctl = self.sim.controller
        gains = ctl.gains
        if "k" in payload:
            gains = self._parse_gains(payload["k"])
        expected = {"lqr4": 4, "cascade": 3, "velocity_ref": None}[mode]
        if expected is not None and (gains is None or len(gains.k) != expected):
            raise ProtocolError(
                f"mode {mode!r} needs a {expected}-entry gain vector")
        self.sim.controller = dataclasses.replace(
            ctl, mode=mode, gains=gains if expected is not None else ctl.gains)
        self._teleop_velocity = 0.0
        return self._ack("set_mode", {"mode": mode})

    def _apply_reset(self, payload: dict) -> dict:
        cfg = self.sim.cfg
        if "initial" in payload:
            init = payload["initial"]
            if not isinstance(init, dict):
                raise ProtocolError("initial must be an object")
            state = PlantState(
                phi=_number(init.get("phi", 0.0), "phi"),
                phi_dot=_number(init.get("phi_dot", 0.0), "phi_dot"),
                theta=_number(init.get("theta", 0.0), "theta"),
                theta_dot=_number(init.get("theta_dot", 0.0), "theta_dot"))
            self.sim.cfg = dataclasses.replace(cfg, initial=state)
        self.sim.controller = self.sim.cfg.controller
        self._teleop_velocity = 0.0
        self.sim.reset()
        self._prev_safety = None
        return self._ack("reset")

    def _apply_sim_option(self, payload: dict) -> dict:
        applied = {}
        staged_cfg = self.sim.cfg
        staged_scale = self.time_scale
        staged_rate = self.telemetry_rate
        for key, value in payload.items():
            if key == "time_scale":
                staged_scale = _number(value, key)
                if staged_scale < 0.0:
                    raise ProtocolError("time_scale must be >= 0")
            elif key == "telemetry_rate":
                staged_rate = _number(value, key)
                if staged_rate <= 0.0 \
                        or staged_rate > 1.0 / staged_cfg.dt_control + 1e-9:
                    raise ProtocolError("telemetry rate above control rate")
            elif key in ("torque_limit", "backlash_halfwidth",
                         "theta_ref_offset", "filter_alpha"):
                staged_cfg = dataclasses.replace(
                    staged_cfg, **{key: _number(value, key)})
            elif key == "feedback_source":
                if value not in ("true_state", "estimate"):
                    raise ProtocolError("bad feedback_source")
                staged_cfg = dataclasses.replace(staged_cfg,
                                                 feedback_source=value)
            else:
                raise ProtocolError(f"unknown simulation option {key!r}")
            applied[key] = value
        # All validated: commit atomically.
        self.sim.cfg = staged_cfg
        self.sim.theta_ref_offset = staged_cfg.theta_ref_offset
        if staged_scale != self.time_scale:
            if staged_scale > 0.0:
                self._resume_scale = staged_scale
            self.time_scale = staged_scale
        self.telemetry_rate = staged_rate
        return self._ack("set_sim_option", applied)

    @staticmethod
    def _parse_gains(raw) -> GainVector:
        if not isinstance(raw, (list, tuple)) or not raw:
            raise ProtocolError("gains must be a non-empty array 'k'")
        try:
            k = tuple(float(v) for v in raw)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"gains must be numbers: {exc}") from exc
        if not all(math.isfinite(v) for v in k):
            raise ProtocolError("gains must be finite")
        states = ("phi", "phi_dot", "theta", "theta_dot") if len(k) == 4 \
            else BALANCE_STATE_LABELS if len(k) == 3 else None
        if states is None:
            raise ProtocolError("gain vector must have 3 or 4 entries")
        return GainVector(k=k, states=states)

    @staticmethod
    def _parse_weights(payload: dict) -> LQRWeights:
        q = payload.get("Q")
        r = payload.get("R")
        if not isinstance(q, (list, tuple)) or len(q) not in (3, 4):
            raise ProtocolError("Q must be a 3- or 4-entry diagonal")
        try:
            return LQRWeights(q_diag=tuple(float(v) for v in q),
                              r=float(r))
        except (TypeError, ValueError, InvalidInputError) as exc:
            raise ProtocolError(f"bad weights: {exc}") from exc

    # -- the paced loop -------------------------------------------------------

    def _decimation(self) -> int:
        control_rate = 1.0 / self.sim.cfg.dt_control
        return max(1, int(round(control_rate / self.telemetry_rate)))

    async def _run(self) -> None:
        loop = asyncio.get_running_loop()
        next_deadline = loop.time()
        last_heartbeat = loop.time()
        while not self.closed:
            self._drain_commands()
            now = loop.time()
            if now - last_heartbeat >= HEARTBEAT_PERIOD:
                last_heartbeat = now
                self._broadcast({"type": "heartbeat", "seq": next(self._seq),
                                 "ts": self.sim.t,
                                 "paused": self.time_scale == 0.0},
                                droppable=False)
            if self.time_scale <= 0.0:
                next_deadline = loop.time()
                await asyncio.sleep(0.02)
                continue
            if self._teleop_velocity != 0.0 \
                    and self.sim.controller.mode != "velocity_ref":
                ctl = self.sim.controller
                dp = self.params.r * self._teleop_velocity \
                    * self.sim.cfg.dt_control
                self.sim.controller = dataclasses.replace(
                    ctl, p_ref=ctl.p_ref + dp)
            frame = self.sim.control_step()
            if self.sim.step_index % self._decimation() == 0:
                self._broadcast(frame_to_message(frame, next(self._seq)),
                                droppable=True)
            self._emit_safety_events(frame)
            next_deadline += self.sim.cfg.dt_control / self.time_scale
            now = loop.time()
            if next_deadline < now - 0.25:
                next_deadline = now       # fell behind badly: resync
            await asyncio.sleep(max(0.0, next_deadline - now))


class SessionManager:
    """Owns all live sessions and enforces the concurrency limit."""

    def __init__(self, params: RobotParams | None = None,
                 max_sessions: int = DEFAULT_MAX_SESSIONS):
        self.params = params if params is not None else RobotParams()
        self.max_sessions = max_sessions
        self.sessions: dict[int, Session] = {}
        self._ids = itertools.count(1)

    def open_session(self, config: SimConfig,
                     telemetry_rate: float = DEFAULT_TELEMETRY_RATE,
                     time_scale: float = 1.0) -> Session:
        if len(self.sessions) >= self.max_sessions:
            raise SessionLimitError(
                f"session limit of {self.max_sessions} reached")
        session = Session(next(self._ids), config, self.params,
                          telemetry_rate=telemetry_rate,
                          time_scale=time_scale)
        self.sessions[session.session_id] = session
        session.start()
        return session

    async def close_session(self, session_id: int) -> None:
        session = self.sessions.pop(session_id, None)
        if session is not None:
            await session.close()

    async def close_all(self) -> None:
        for sid in list(self.sessions):
            await self.close_session(sid)


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"{name} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ProtocolError(f"{name} must be finite")
    return value


# ---------------------------------------------------------------------------
# connection handling (shared by both framings)
# ---------------------------------------------------------------------------

class _Connection:
    """Protocol logic of one client, independent of the framing.

    The outbox belongs to the connection and survives re-attachment to
    another session; only connection teardown closes it.
    """

    def __init__(self, server: "TelemetryServer"):
        self.server = server
        self.session: Session | None = None
        self.outbox = Outbox()

    def attach(self, session: Session) -> dict:
        if self.session is not None:
            self.session.detach_subscriber(self.outbox)
        self.session = session
        session.attach_subscriber(self.outbox)
        hello = {"type": "hello", "seq": 0, "ts": session.sim.t,
                 "protocol_version": PROTOCOL_VERSION,
                 "session": session.info().to_dict()}
        self.outbox.put(hello, droppable=False)
        return hello

    def detach(self) -> None:
        if self.session is not None:
            self.session.detach_subscriber(self.outbox)
        self.session = None
        self.outbox.close()

    async def handle_message(self, raw: bytes | str) -> None:
        try:
            msg = json.loads(raw)
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as exc:
            self._reply({"type": "error", "seq": -1, "ts": 0.0,
                         "message": f"malformed JSON: {exc}"})
            return
        mtype = msg.get("type")
        client_seq = msg.get("seq")
        try:
            if mtype == "command":
                await self._handle_command(msg, client_seq)
            elif mtype == "open_session":
                self._handle_open(msg)
            elif mtype == "attach":
                self._handle_attach(msg)
            elif mtype == "ping":
                self._reply({"type": "pong", "seq": -1,
                             "ts": self._session_ts(),
                             "in_reply_to": client_seq})
            else:
                raise ProtocolError(f"unknown message type {mtype!r}")
        except SessionLimitError as exc:
            self._reply({"type": "error", "seq": -1,
                         "ts": self._session_ts(),
                         "in_reply_to": client_seq, "message": str(exc)})
        except BalbotError as exc:
            self._reply({"type": "error", "seq": -1,
                         "ts": self._session_ts(),
                         "in_reply_to": client_seq, "message": str(exc)})

    def _session_ts(self) -> float:
        return self.session.sim.t if self.session is not None else 0.0

    def _reply(self, message: dict) -> None:
        if self.outbox is not None:
            self.outbox.put(message, droppable=False)

    async def _handle_command(self, msg: dict, client_seq) -> None:
        if self.session is None:
            raise ProtocolError("no session attached")
        kind = msg.get("kind")
        if kind not in COMMAND_KINDS:
            raise ProtocolError(f"unknown command kind {kind!r}")
        reply = await self.session.submit(kind, msg.get("payload", {}))
        reply = dict(reply)
        reply["in_reply_to"] = client_seq
        self._reply(reply)

    def _handle_open(self, msg: dict) -> None:
        from .simulation import config_from_dict
        cfg = self.server.default_config if "config" not in msg \
            else config_from_dict(msg["config"])
        session = self.server.manager.open_session(
            cfg,
            telemetry_rate=float(msg.get("telemetry_rate",
                                         DEFAULT_TELEMETRY_RATE)),
            time_scale=float(msg.get("time_scale", 1.0)))
        self.attach(session)

    def _handle_attach(self, msg: dict) -> None:
        sid = msg.get("session_id")
        session = self.server.manager.sessions.get(sid)
        if session is None:
            raise ProtocolError(f"no session {sid!r}")
        self.attach(session)


# ---------------------------------------------------------------------------
# servers: newline-delimited TCP, WebSocket + static files
# ---------------------------------------------------------------------------

class TelemetryServer:
    """Hosts the session manager behind both wire framings."""

    def __init__(self, default_config: SimConfig,
                 params: RobotParams | None = None,
                 max_sessions: int = DEFAULT_MAX_SESSIONS,
                 ui_dir: Path | None = None):
        self.manager = SessionManager(params, max_sessions)
        self.default_config = default_config
        self.ui_dir = Path(ui_dir) if ui_dir is not None else None
        self._tcp: asyncio.AbstractServer | None = None
        self._http: asyncio.AbstractServer | None = None
        self._default_session: Session | None = None

    # -- lifecycle ----------------------------------------------------------

    def ensure_default_session(self) -> Session:
        if self._default_session is None or self._default_session.closed:
            self._default_session = self.manager.open_session(
                self.default_config)
        return self._default_session

    async def start_tcp(self, host: str, port: int) -> int:
        self._tcp = await asyncio.start_server(self._serve_tcp, host, port)
        return self._tcp.sockets[0].getsockname()[1]

    async def start_http(self, host: str, port: int) -> int:
        self._http = await asyncio.start_server(self._serve_http, host, port)
        return self._http.sockets[0].getsockname()[1]

    async def close(self) -> None:
        for server in (self._tcp, self._http):
            if server is not None:
                server.close()
                await server.wait_closed()
        await self.manager.close_all()

    # -- newline-delimited TCP ------------------------------------------------

    async def _serve_tcp(self, reader: asyncio.StreamReader,
                         writer: asyncio.StreamWriter) -> None:
        conn = _Connection(self)
        conn.attach(self.ensure_default_session())

        async def pump() -> None:
            while True:
                message = await conn.outbox.get()
                if message is None:
                    return
                writer.write(json.dumps(message, separators=(",", ":"))
                             .encode() + b"\n")
                await writer.drain()

        pump_task = asyncio.get_running_loop().create_task(pump())
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                line = line.strip()
                if line:
                    await conn.handle_message(line)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            pump_task.cancel()
            conn.detach()
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    # -- HTTP: static UI + WebSocket upgrade ----------------------------------

    async def _serve_http(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        try:
            head = await reader.readuntil(b"\r\n\r\n")
        except (asyncio.IncompleteReadError, asyncio.LimitOverrunError):
            writer.close()
            return
        request_line, _, header_block = head.partition(b"\r\n")
        parts = request_line.decode("latin-1").split()
        if len(parts) < 2:
            writer.close()
            return
        method, target = parts[0], parts[1]
        headers = {}
        for line in header_block.decode("latin-1").split("\r\n"):
            if ":" in line:
                key, _, value = line.partition(":")
                headers[key.strip().lower()] = value.strip()
        if headers.get("upgrade", "").lower() == "websocket":
            await self._serve_websocket(reader, writer, headers)
            return
        if method != "GET":
            await self._http_simple(writer, 405, b"method not allowed")
            return
        await self._serve_static(writer, target)

    async def _http_simple(self, writer, status: int, body: bytes,
                           content_type: str = "text/plain") -> None:
        reason = {200: "OK", 404: "Not Found", 405: "Method Not Allowed"}
        writer.write(
            f"HTTP/1.1 {status} {reason.get(status, '')}\r\n"
            f"Content-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\n"
            "Connection: close\r\n\r\n".encode() + body)
        try:
            await writer.drain()
        except ConnectionError:
            pass
        writer.close()

    async def _serve_static(self, writer, target: str) -> None:
        if self.ui_dir is None:
            await self._http_simple(
                writer, 404, b"no UI directory configured; "
                b"connect via TCP or WebSocket")
            return
        path = target.split("?", 1)[0]
        if path in ("/", ""):
            path = "/index.html"
        candidate = (self.ui_dir / path.lstrip("/")).resolve()
        try:
            candidate.relative_to(self.ui_dir.resolve())
        except ValueError:
            await self._http_simple(writer, 404, b"not found")
            return
        if not candidate.is_file():
            await self._http_simple(writer, 404, b"not found")
            return
        ctype = mimetypes.guess_type(candidate.name)[0] or \
            "application/octet-stream"
        await self._http_simple(writer, 200, candidate.read_bytes(), ctype)

    async def _serve_websocket(self, reader, writer, headers) -> None:
        key = headers.get("sec-websocket-key")
        if key is None:
            writer.close()
            return
        accept = base64.b64encode(hashlib.sha1(
            (key + _WS_GUID).encode()).digest()).decode()
        writer.write(
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n".encode())
        await writer.drain()

        conn = _Connection(self)
        conn.attach(self.ensure_default_session())

        async def pump() -> None:
            while True:
                message = await conn.outbox.get()
                if message is None:
                    return
                payload = json.dumps(message, separators=(",", ":")).encode()
                writer.write(ws_encode_frame(payload))
                await writer.drain()

        pump_task = asyncio.get_running_loop().create_task(pump())
        try:
            while True:
                opcode, payload = await ws_read_frame(reader)
                if opcode == 0x8:          # close
                    break
                if opcode == 0x9:          # ping -> pong
                    writer.write(ws_encode_frame(payload, opcode=0xA))
                    await writer.drain()
                elif opcode in (0x1, 0x2):
                    await conn.handle_message(payload)
        except (ConnectionError, asyncio.IncompleteReadError, ProtocolError):
            pass
        finally:
            pump_task.cancel()
            conn.detach()
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass


# ---------------------------------------------------------------------------
# WebSocket framing (RFC 6455, no fragmentation/extensions)
# ---------------------------------------------------------------------------

def ws_encode_frame(payload: bytes, opcode: int = 0x1,
                    mask: bool = False) -> bytes:
    head = bytearray([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if length < 126:
        head.append(mask_bit | length)
    elif length < (1 << 16):
        head.append(mask_bit | 126)
        head += length.to_bytes(2, "big")
    else:
        head.append(mask_bit | 127)
        head += length.to_bytes(8, "big")
    if mask:
        key = b"\x12\x34\x56\x78"        # deterministic client mask is legal
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


async def ws_read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes]:
    first = await reader.readexactly(2)
    fin = first[0] & 0x80
    opcode = first[0] & 0x0F
    if not fin or opcode == 0x0:
        raise ProtocolError("fragmented WebSocket frames are not supported")
    masked = first[1] & 0x80
    length = first[1] & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    elif length == 127:
        length = int.from_bytes(await reader.readexactly(8), "big")
    key = await reader.readexactly(4) if masked else None
    payload = await reader.readexactly(length)
    if key is not None:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload
