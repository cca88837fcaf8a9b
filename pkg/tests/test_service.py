"""Session-server tests: streaming, commands, pacing, both wire framings.

Sessions run at a large time scale so simulated seconds pass in wall
milliseconds; pacing-sensitive checks use simulation timestamps, which
are exact, rather than wall-clock measurements.
"""

import asyncio
import base64
import hashlib
import json
import math

import pytest

from balbot import service as svc
from balbot.errors import SessionLimitError
from balbot.model import PlantState, RobotParams
from balbot.simulation import ControllerConfig, ImuNoise, SimConfig
from balbot.synthesis import GainVector

FAST = 200.0   # time scale for tests


def default_config(**overrides):
    base = dict(duration=3600.0,
                controller=ControllerConfig(mode="velocity_ref"),
                initial=PlantState())
    base.update(overrides)
    return SimConfig(**base)


def balancing_config(reference_gains, **overrides):
    gains = GainVector(k=tuple(reference_gains["lqr4"]["k"]),
                       states=("phi", "phi_dot", "theta", "theta_dot"))
    return default_config(
        controller=ControllerConfig(mode="lqr4", gains=gains), **overrides)


async def collect(outbox, want_types=("frame",), count=1, timeout=5.0):
    got = []
    async def _drain():
        while len(got) < count:
            msg = await outbox.get()
            if msg is None:
                return
            if msg["type"] in want_types:
                got.append(msg)
    await asyncio.wait_for(_drain(), timeout)
    return got


def run(coro):
    return asyncio.run(coro)


# ---------------------------------------------------------------------------
# session behavior (python surface)
# ---------------------------------------------------------------------------

def test_stream_rate_arithmetic():
    # 50 Hz telemetry over a 2 s simulation window: exactly 100 frames.
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), telemetry_rate=50.0,
                                       time_scale=FAST)
        box = session.subscribe()
        frames = await collect(box, count=101, timeout=20.0)
        in_window = [f for f in frames if 0.0 < f["ts"] <= 2.0]
        assert len(in_window) == 100
        ts = [f["ts"] for f in frames]
        assert all(b > a for a, b in zip(ts, ts[1:]))  # strictly ordered
        await manager.close_all()
    run(main())


def test_telemetry_rate_cannot_exceed_control_rate():
    async def main():
        manager = svc.SessionManager()
        with pytest.raises(Exception):
            manager.open_session(default_config(), telemetry_rate=500.0)
        await manager.close_all()
    run(main())


def test_time_scale_zero_opens_paused():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=0.0)
        box = session.subscribe()
        beat = (await collect(box, want_types=("heartbeat",), count=2,
                              timeout=5.0))[-1]
        assert beat["paused"] is True
        assert beat["ts"] == 0.0         # state frozen, no frames produced
        await manager.close_all()
    run(main())


def test_session_limit_rejects_ninth():
    async def main():
        manager = svc.SessionManager(max_sessions=8)
        for _ in range(8):
            manager.open_session(default_config(), time_scale=0.0)
        with pytest.raises(SessionLimitError):
            manager.open_session(default_config(), time_scale=0.0)
        await manager.close_all()
    run(main())


def test_teleop_velocity_applies_within_three_control_periods():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=FAST,
                                       telemetry_rate=200.0)
        box = session.subscribe()
        await collect(box, count=1)                   # stream is live
        ack = await session.submit("teleop_velocity", {"value": 2.0})
        assert ack["type"] == "ack"
        frames = await collect(box, count=40)
        reflected = [f for f in frames if f["u"] == 2.0]
        assert reflected
        first = min(f["ts"] for f in reflected)
        assert first - ack["effective_ts"] <= 3 * 0.005 + 1e-9
        await manager.close_all()
    run(main())


def test_set_gains_validates_and_applies(reference_gains):
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(balancing_config(reference_gains),
                                       time_scale=FAST)
        old = session.sim.controller.gains
        bad = await session.submit("set_gains", {"k": [1, 2, 3, 4, 5]})
        assert bad["type"] == "error"
        assert session.sim.controller.gains == old    # rejected: unchanged
        good = await session.submit("set_gains", {"k": [-0.2, -2.0, -90.0,
                                                        -15.0]})
        assert good["type"] == "ack"
        assert session.sim.controller.gains.k == (-0.2, -2.0, -90.0, -15.0)
        await manager.close_all()
    run(main())


def test_resynthesize_returns_reference_gains(reference_gains):
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(balancing_config(reference_gains),
                                       time_scale=0.0)
        spec = reference_gains["lqr4"]
        ack = await session.submit("set_weights_and_resynthesize",
                                   {"Q": spec["Q"], "R": spec["R"]})
        assert ack["type"] == "ack"
        for got, ref in zip(ack["payload"]["gains"], spec["k"]):
            assert abs(got - ref) <= spec["tolerance_rel"] * abs(ref)
        assert session.sim.controller.gains.k == tuple(ack["payload"]["gains"])
        await manager.close_all()
    run(main())


def test_command_ordering_single_client():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=FAST)
        acks = await asyncio.gather(
            session.submit("set_reference", {"p_ref": 1.0}),
            session.submit("set_reference", {"p_ref": 2.0}))
        assert [a["type"] for a in acks] == ["ack", "ack"]
        assert session.sim.controller.p_ref == 2.0
        await manager.close_all()
    run(main())


def test_pause_resume_and_heartbeat_state():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=FAST)
        box = session.subscribe()
        await collect(box, count=2)
        await session.submit("pause", {})
        t_pause = session.sim.t
        beat = (await collect(box, want_types=("heartbeat",), count=2,
                              timeout=5.0))[-1]
        assert beat["paused"] is True
        assert session.sim.t == t_pause          # frozen
        await session.submit("resume", {})
        frames = await collect(box, count=2)
        assert frames[-1]["ts"] > t_pause
        await manager.close_all()
    run(main())


def test_reset_restores_bit_identical_stream(reference_gains):
    async def main():
        manager = svc.SessionManager()
        cfg = balancing_config(
            reference_gains,
            initial=PlantState(theta=math.radians(3.0)),
            imu_noise=ImuNoise(accel_sigma=0.02, gyro_sigma=0.005))
        session = manager.open_session(cfg, time_scale=FAST,
                                       telemetry_rate=200.0)
        box = session.subscribe()
        first = await collect(box, count=30)
        ack = await session.submit("reset", {})
        assert ack["type"] == "ack"
        second = await collect(box, count=60)
        second = [f for f in second if f["ts"] <= first[-1]["ts"]][:30]
        key = lambda f: (f["ts"], f["state"]["theta"], f["u"], f["torque"])
        assert [key(f) for f in first] == [key(f) for f in second]
        await manager.close_all()
    run(main())


def test_broadcast_subscribers_see_identical_frames():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=FAST)
        box_a, box_b = session.subscribe(), session.subscribe()
        frames_a = await collect(box_a, count=10)
        frames_b = await collect(box_b, count=10)
        trim = min(len(frames_a), len(frames_b))
        assert frames_a[:trim] == frames_b[:trim]
        await manager.close_all()
    run(main())


def test_stalled_subscriber_never_stalls_simulation():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=FAST,
                                       telemetry_rate=200.0)
        stalled = session.subscribe()        # never consumed
        healthy = session.subscribe()
        await collect(healthy, count=400, timeout=60.0)   # 2 s of sim time
        assert session.sim.t >= 2.0          # cadence maintained
        assert stalled.dropped > 0           # oldest frames were discarded
        assert len(stalled._items) <= svc.SUBSCRIBER_BUFFER_FRAMES + 16
        fresh = await collect(healthy, count=1)
        assert fresh[0]["ts"] >= session.sim.t - 1.0
        await manager.close_all()
    run(main())


def test_safety_event_emitted_on_limiter_trip(reference_gains):
    async def main():
        manager = svc.SessionManager()
        cfg = balancing_config(reference_gains,
                               initial=PlantState(theta=math.radians(35.0)))
        session = manager.open_session(cfg, time_scale=FAST)
        box = session.subscribe()
        events = await collect(box, want_types=("event",), count=1,
                               timeout=10.0)
        # Losing the 35 deg catch trips either the limiter (ok -> False)
        # or the slip monitor (detected -> True); motors go off with it.
        name, value = events[0]["name"], events[0]["value"]
        assert (name, value) in (("angle_ok", False),
                                 ("motors_enabled", False),
                                 ("slip_detected", True))
        await manager.close_all()
    run(main())


def test_set_sim_option_validation():
    async def main():
        manager = svc.SessionManager()
        session = manager.open_session(default_config(), time_scale=0.0)
        bad = await session.submit("set_sim_option", {"bogus": 1.0})
        assert bad["type"] == "error"
        ok = await session.submit("set_sim_option", {"torque_limit": 0.2,
                                                     "time_scale": 5.0})
        assert ok["type"] == "ack"
        assert session.sim.cfg.torque_limit == 0.2
        assert session.time_scale == 5.0
        await manager.close_all()
    run(main())


def test_outbox_drop_policy():
    async def main():
        box = svc.Outbox(max_frames=4)
        box.put({"type": "hello", "n": -1})
        for n in range(8):
            box.put({"type": "frame", "n": n}, droppable=True)
        assert box.dropped == 4
        got = []
        while box._items:
            got.append(await box.get())
        assert got[0]["type"] == "hello"          # control never dropped
        assert [m["n"] for m in got[1:]] == [4, 5, 6, 7]
    run(main())


# ---------------------------------------------------------------------------
# wire framings
# ---------------------------------------------------------------------------

async def _read_json_line(reader):
    line = await asyncio.wait_for(reader.readline(), 10.0)
    assert line
    return json.loads(line)


def test_tcp_ndjson_round_trip():
    async def main():
        server = svc.TelemetryServer(default_config())
        port = await server.start_tcp("127.0.0.1", 0)
        server.ensure_default_session().time_scale = FAST
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        hello = await _read_json_line(reader)
        assert hello["type"] == "hello"
        assert hello["session"]["controller"]["mode"] == "velocity_ref"

        writer.write((json.dumps({
            "type": "command", "seq": 7, "kind": "teleop_velocity",
            "payload": {"value": 1.5}}) + "\n").encode())
        await writer.drain()
        while True:
            msg = await _read_json_line(reader)
            if msg["type"] in ("ack", "error"):
                break
        assert msg["type"] == "ack" and msg["in_reply_to"] == 7

        # Malformed JSON gets an error reply, stream continues.
        writer.write(b"{nonsense\n")
        await writer.drain()
        while True:
            msg = await _read_json_line(reader)
            if msg["type"] == "error":
                break
        assert "malformed" in msg["message"]

        frame = None
        while frame is None:
            msg = await _read_json_line(reader)
            if msg["type"] == "frame":
                frame = msg
        assert frame["u"] == 1.5

        writer.close()
        await writer.wait_closed()
        await server.close()
    run(main())


def test_tcp_unknown_command_kind_is_rejected():
    async def main():
        server = svc.TelemetryServer(default_config())
        port = await server.start_tcp("127.0.0.1", 0)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        await _read_json_line(reader)                      # hello
        writer.write((json.dumps({"type": "command", "seq": 1,
                                  "kind": "explode"}) + "\n").encode())
        await writer.drain()
        while True:
            msg = await _read_json_line(reader)
            if msg["type"] == "error":
                break
        assert "explode" in msg["message"]
        writer.close()
        await writer.wait_closed()
        await server.close()
    run(main())


def test_websocket_handshake_and_round_trip():
    async def main():
        server = svc.TelemetryServer(default_config())
        port = await server.start_http("127.0.0.1", 0)
        server.ensure_default_session().time_scale = FAST
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        key = base64.b64encode(b"0123456789abcdef").decode()
        writer.write((
            "GET /ws HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n").encode())
        await writer.drain()
        head = await reader.readuntil(b"\r\n\r\n")
        assert b"101" in head.split(b"\r\n", 1)[0]
        expect = base64.b64encode(hashlib.sha1(
            (key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11").encode())
            .digest()).decode()
        assert expect.encode() in head

        opcode, payload = await svc.ws_read_frame(reader)
        hello = json.loads(payload)
        assert opcode == 0x1 and hello["type"] == "hello"

        writer.write(svc.ws_encode_frame(json.dumps({
            "type": "command", "seq": 3, "kind": "teleop_velocity",
            "payload": {"value": -1.0}}).encode(), mask=True))
        await writer.drain()
        reply = None
        while reply is None:
            _, payload = await svc.ws_read_frame(reader)
            msg = json.loads(payload)
            if msg["type"] in ("ack", "error"):
                reply = msg
        assert reply["type"] == "ack" and reply["in_reply_to"] == 3

        writer.write(svc.ws_encode_frame(b"", opcode=0x8, mask=True))
        await writer.drain()
        writer.close()
        await writer.wait_closed()
        await server.close()
    run(main())


def test_http_serves_static_ui(tmp_path):
    async def main():
        (tmp_path / "index.html").write_text("<html>robot</html>")
        server = svc.TelemetryServer(default_config(), ui_dir=tmp_path)
        port = await server.start_http("127.0.0.1", 0)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        writer.write(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
        await writer.drain()
        response = await reader.read()
        assert b"200 OK" in response and b"robot" in response
        writer.close()
        # Path traversal is refused.
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        writer.write(b"GET /../secret HTTP/1.1\r\nHost: x\r\n\r\n")
        await writer.drain()
        response = await reader.read()
        assert b"404" in response
        writer.close()
        await server.close()
    run(main())


def test_serve_cli_prints_ephemeral_ports():
    async def main():
        proc = await asyncio.create_subprocess_exec(
            "python3", "-m", "balbot.cli", "serve", "--port", "0",
            "--http-port", "0", stdout=asyncio.subprocess.PIPE,
            stderr=asyncio.subprocess.PIPE)
        try:
            line = await asyncio.wait_for(proc.stdout.readline(), 30.0)
            text = line.decode()
            assert "listening:" in text
            tcp_port = int(text.split("tcp=127.0.0.1:")[1].split()[0])
            assert tcp_port > 0
            reader, writer = await asyncio.open_connection("127.0.0.1",
                                                           tcp_port)
            hello = await _read_json_line(reader)
            assert hello["type"] == "hello"
            writer.close()
        finally:
            proc.terminate()
            await proc.wait()
    run(main())


def test_open_session_over_wire_with_custom_config(reference_gains):
    async def main():
        server = svc.TelemetryServer(default_config())
        port = await server.start_tcp("127.0.0.1", 0)
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        await _read_json_line(reader)                      # default hello
        from balbot.simulation import config_to_dict
        cfg = config_to_dict(balancing_config(reference_gains))
        writer.write((json.dumps({"type": "open_session", "seq": 1,
                                  "config": cfg, "time_scale": 0.0})
                      + "\n").encode())
        await writer.drain()
        while True:
            msg = await _read_json_line(reader)
            if msg["type"] == "hello":
                break
        assert msg["session"]["controller"]["mode"] == "lqr4"
        assert msg["session"]["session_id"] >= 2
        writer.close()
        await writer.wait_closed()
        await server.close()
    run(main())
