"""Deterministic fixed-step closed-loop simulator.

The plant integrates the full nonlinear mechanics with RK4 at dt_physics.
The wheel actuator is the closed velocity loop: instead of modeling motor
electronics, each step enforces the loop's first-order law

    phi_dd = (K u_ref - phi_dot) / t_EM

algebraically and solves the mechanics for the torque that realizes it.
Linearizing this construction reproduces the combined linear model
exactly, so the linear system is the literal small-signal truth of this
simulator.  If a torque limit is set and the required torque exceeds it,
the step falls back to torque mode at the clamped value.

The controller runs every dt_control with zero-order hold.  Per control
step the simulator also emulates the IMU (gravity plus longitudinal
acceleration rotated into the body frame, the pitch-acceleration lever
arm deliberately neglected), updates the complementary filter, and
evaluates the safety logic: angle limiter with re-enable hysteresis,
wheel-slip monitor, and battery monitor.  A disabled motor stage forces
u_ref = 0 and zero torque (the body falls ballistically).

Everything is deterministic for a fixed seed: identical configs produce
bit-identical telemetry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SimulationDivergedError
from .model import PlantState, RobotParams, accelerations
from .synthesis import FEEDBACK_CONVENTION, GainVector

CONFIG_SCHEMA_VERSION = 1

ANGLE_TRIP_MIN = math.radians(-30.0)
ANGLE_TRIP_MAX = math.radians(40.0)
ANGLE_REENABLE = math.radians(5.0)

DEFAULT_SLIP_THRESHOLD = 3.0          # m/s^2
DEFAULT_CELL_LOW_VOLTS = 2.9
DEFAULT_CELL_FULL_VOLTS = 3.3
DEFAULT_CELL_COUNT = 3                # 9.9 V nominal pack
DEFAULT_BATTERY_DRAIN = 5e-4          # V per (N.m.s) drawn

DIVERGENCE_LIMIT = 1e9

TELEMETRY_CSV_HEADER = "t,phi,phi_dot,theta,theta_dot,p,u,T,theta_est,enabled,slip,batt"


@dataclass(frozen=True)
class ImuNoise:
    """Additive white noise levels of the emulated IMU."""

    accel_sigma: float = 0.0   # m/s^2
    gyro_sigma: float = 0.0    # rad/s

    def __post_init__(self):
        if self.accel_sigma < 0.0 or self.gyro_sigma < 0.0:
            raise InvalidInputError("noise levels must be >= 0")


@dataclass(frozen=True)
class SafetyConfig:
    """Thresholds of the safety stack (all overridable per experiment)."""

    slip_threshold: float = DEFAULT_SLIP_THRESHOLD
    cell_low_volts: float = DEFAULT_CELL_LOW_VOLTS
    cell_full_volts: float = DEFAULT_CELL_FULL_VOLTS
    cell_count: int = DEFAULT_CELL_COUNT
    battery_drain_v_per_nms: float = DEFAULT_BATTERY_DRAIN


@dataclass(frozen=True)
class ControllerConfig:
    """Active control law.

    mode "lqr4": full-state feedback u = -k (x - x_ref).
    mode "cascade": outer proportional position loop commanding the pitch
        reference of the 3-state balance controller.
    mode "velocity_ref": the raw wheel-velocity reference goes straight to
        the actuator loop (no balancing).
    """

    mode: str = "lqr4"
    gains: GainVector | None = None
    kp_pos: float = 0.4        # rad of pitch command per meter of error
    p_ref: float = 0.0
    theta_ref: float = 0.0
    phi_dot_ref: float = 0.0

    def __post_init__(self):
        expected = {"lqr4": 4, "cascade": 3, "velocity_ref": None}
        if self.mode not in expected:
            raise InvalidInputError(f"unknown controller mode {self.mode!r}")
        want = expected[self.mode]
        if want is not None:
            if self.gains is None or len(self.gains.k) != want:
                raise InvalidInputError(
                    f"mode {self.mode!r} needs a {want}-entry gain vector")
            if self.gains.convention != FEEDBACK_CONVENTION:
                raise InvalidInputError(
                    f"unexpected convention {self.gains.convention!r}")


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation experiment."""

    duration: float
    controller: ControllerConfig
    dt_physics: float = 1e-3
    dt_control: float = 5e-3
    initial: PlantState = field(default_factory=PlantState)
    backlash_halfwidth: float = 0.0    # rad, 0 = off
    torque_limit: float = 0.0          # N.m, 0 = off
    imu_noise: ImuNoise = field(default_factory=ImuNoise)
    seed: int = 0
    theta_ref_offset: float = 0.0      # rad, asymmetric-build trim
    filter_alpha: float = 0.98
    feedback_source: str = "true_state"   # or "estimate"
    safety: SafetyConfig = field(default_factory=SafetyConfig)

    def __post_init__(self):
        if self.duration <= 0.0:
            raise InvalidInputError("duration must be positive")
        if self.dt_physics <= 0.0 or self.dt_control <= 0.0:
            raise InvalidInputError("time steps must be positive")
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise InvalidInputError(
                "dt_control must be an integer multiple of dt_physics")
        if not 0.0 <= self.filter_alpha <= 1.0:
            raise InvalidInputError("filter_alpha must be in [0, 1]")
        if self.feedback_source not in ("true_state", "estimate"):
            raise InvalidInputError("feedback_source must be "
                                    "'true_state' or 'estimate'")
        if self.backlash_halfwidth < 0.0 or self.torque_limit < 0.0:
            raise InvalidInputError("backlash/torque limit must be >= 0")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_physics))


@dataclass(frozen=True)
class SafetyStatus:
    """Safety flags of one control step."""

    motors_enabled: bool
    angle_ok: bool
    slip_detected: bool
    battery_low: bool
    delta_p_ddot: float = 0.0


@dataclass(frozen=True)
class TelemetryFrame:
    """One control-step record of the closed-loop run."""

    t: float
    state: PlantState
    p: float
    u: float
    torque: float
    theta_est: float
    safety: SafetyStatus


# ---------------------------------------------------------------------------
# sensors and safety primitives
# ---------------------------------------------------------------------------

def imu_emulate(state: PlantState, p_ddot: float, theta_ddot: float,
                noise: ImuNoise = ImuNoise(), rng=None,
                g: float = 9.81) -> tuple[float, float, float]:
    """Body-frame accelerometer and gyro readings.

    The specific force (p_dd, g) is rotated into the body frame by the
    pitch angle; the lever-arm term from theta_ddot is deliberately left
    out (it would need a noisy discrete derivative on real hardware, so
    the reference design omits it too -- the argument is kept to make the
    omission explicit).  Gaussian noise comes from `rng` when given.
    """
    del theta_ddot  # lever arm intentionally not modeled
    c, s = math.cos(state.theta), math.sin(state.theta)
    a_x = c * p_ddot + s * g
    a_z = -s * p_ddot + c * g
    gyro = state.theta_dot
    if rng is not None and (noise.accel_sigma > 0.0 or noise.gyro_sigma > 0.0):
        a_x += rng.normal(0.0, noise.accel_sigma) if noise.accel_sigma else 0.0
        a_z += rng.normal(0.0, noise.accel_sigma) if noise.accel_sigma else 0.0
        gyro += rng.normal(0.0, noise.gyro_sigma) if noise.gyro_sigma else 0.0
    return a_x, a_z, gyro


def complementary_filter(theta_prev: float, gyro: float, a_x: float,
                         a_z: float, dt: float, alpha: float) -> float:
    """Blend integrated gyro (high frequency) with accelerometer tilt."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError("alpha must be in [0, 1]")
    return alpha * (theta_prev + gyro * dt) + (1.0 - alpha) * math.atan2(a_x, a_z)


def slip_monitor(a_x: float, a_z: float, theta_est: float,
                 phi_ddot_obs: float, r: float,
                 threshold: float = DEFAULT_SLIP_THRESHOLD
                 ) -> tuple[float, bool]:
    """Compare IMU-derived and wheel-derived longitudinal acceleration.

    a_meas = sqrt(ax^2 + az^2), alpha = atan2(ax, az) (two-argument form,
    so a_z = 0 stays defined), beta = alpha - theta, p_dd_imu =
    sin(beta) a_meas.  Returns (delta_p_dd, slipping) with delta_p_dd =
    p_dd_imu - r phi_dd_obs.
    """
    if a_x == 0.0 and a_z == 0.0:
        raise InvalidInputError("accelerometer reading (0, 0) is not usable")
    a_meas = math.hypot(a_x, a_z)
    tilt = math.atan2(a_x, a_z)
    beta = tilt - theta_est
    p_dd_imu = math.sin(beta) * a_meas
    delta = p_dd_imu - r * phi_ddot_obs
    return delta, abs(delta) > threshold


class AngleLimiter:
    """Motor cut-out outside the open interval (-30 deg, 40 deg).

    Once tripped, the limiter re-enables only after the pitch magnitude
    falls below 5 deg, preventing chattering at the trip boundary.
    """

    def __init__(self, trip_min: float = ANGLE_TRIP_MIN,
                 trip_max: float = ANGLE_TRIP_MAX,
                 reenable: float = ANGLE_REENABLE):
        self.trip_min = trip_min
        self.trip_max = trip_max
        self.reenable = reenable
        self.ok = True

    def __call__(self, theta: float) -> bool:
        if self.ok:
            self.ok = self.trip_min < theta < self.trip_max
        else:
            self.ok = abs(theta) < self.reenable
        return self.ok


def battery_monitor(cell_voltages,
                    threshold: float = DEFAULT_CELL_LOW_VOLTS) -> bool:
    """True when any individual cell sits strictly below the threshold."""
    cells = list(cell_voltages)
    if not cells:
        raise InvalidInputError("need at least one cell voltage")
    return any(v < threshold for v in cells)


class EmulatedBattery:
    """Pack of identical cells discharging linearly with torque-time."""

    def __init__(self, safety: SafetyConfig):
        self.cells = [safety.cell_full_volts] * safety.cell_count
        self.drain = safety.battery_drain_v_per_nms

    def draw(self, torque: float, dt: float) -> None:
        drop = self.drain * abs(torque) * dt
        self.cells = [v - drop for v in self.cells]


# ---------------------------------------------------------------------------
# physics stepping
# ---------------------------------------------------------------------------

def _velocity_mode_rates(x, u_ref, params: RobotParams):
    """State derivative and realized torque with the actuator law enforced.

    Substituting p_dd = r (phi_dd + th_dd) with the commanded phi_dd into
    the two mechanics equations leaves a linear 2x2 system in (th_dd, T).
    """
    phi, phi_d, th, th_d = x
    m, r, l, g = params.m, params.r, params.l, params.g
    phi_dd = (params.K * u_ref - phi_d) / params.t_em
    c, s = math.cos(th), math.sin(th)
    a1 = r * r * m + r * l * m * c        # th_dd coefficient, torque row -T
    a2 = 2.0 * l * l * m + r * l * m * c  # th_dd coefficient, torque row +T
    rhs1 = r * l * m * s * th_d * th_d - r * r * m * phi_dd
    rhs2 = g * l * m * s - r * l * m * c * phi_dd
    th_dd = (rhs1 + rhs2) / (a1 + a2)
    torque = a1 * th_dd - rhs1
    return (phi_d, phi_dd, th_d, th_dd), torque


def _torque_mode_rates(x, torque, params: RobotParams):
    """State derivative under a prescribed torque (free wheel otherwise)."""
    phi, phi_d, th, th_d = x
    st = PlantState(phi, phi_d, th, th_d)
    p_dd, th_dd = accelerations(st, torque, params)
    phi_dd = p_dd / params.r - th_dd
    return (phi_d, phi_dd, th_d, th_dd)


def _rk4(f, x, dt):
    k1 = f(x)
    k2 = f(tuple(xi + 0.5 * dt * ki for xi, ki in zip(x, k1)))
    k3 = f(tuple(xi + 0.5 * dt * ki for xi, ki in zip(x, k2)))
    k4 = f(tuple(xi + dt * ki for xi, ki in zip(x, k3)))
    return tuple(xi + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                 for xi, a, b, c, d in zip(x, k1, k2, k3, k4))


def torque_mode_step(state: PlantState, torque: float, dt: float,
                     params: RobotParams) -> PlantState:
    """One RK4 step of the mechanics under constant torque."""
    x = _rk4(lambda x: _torque_mode_rates(x, torque, params),
             (state.phi, state.phi_dot, state.theta, state.theta_dot), dt)
    return PlantState(*x)


def step_physics(state: PlantState, u_ref: float, cfg: SimConfig,
                 params: RobotParams) -> tuple[PlantState, float]:
    """One dt_physics step in velocity mode, honoring the torque limit.

    Returns the new state and the torque realized at the step start.  If
    the required torque exceeds the limit, the whole step runs in torque
    mode at the clamped value.  (Backlash needs gear-play memory and is
    handled by the Simulator, not by this stateless helper.)
    """
    x = (state.phi, state.phi_dot, state.theta, state.theta_dot)
    _, torque = _velocity_mode_rates(x, u_ref, params)
    if cfg.torque_limit > 0.0 and abs(torque) > cfg.torque_limit:
        torque = math.copysign(cfg.torque_limit, torque)
        new_x = _rk4(lambda xx: _torque_mode_rates(xx, torque, params),
                     x, cfg.dt_physics)
    else:
        new_x = _rk4(lambda xx: _velocity_mode_rates(xx, u_ref, params)[0],
                     x, cfg.dt_physics)
    return PlantState(*new_x), torque


# ---------------------------------------------------------------------------
# closed-loop experiment
# ---------------------------------------------------------------------------

class Simulator:
    """Stateful closed-loop simulation (controller, sensors, safety).

    A session advances one control step at a time; `run_experiment` is the
    batch convenience wrapper.  Instances are single-threaded by design --
    move them between threads, never share them.
    """

    def __init__(self, cfg: SimConfig, params: RobotParams | None = None):
        self.cfg = cfg
        self.params = params if params is not None else RobotParams()
        self.reset()

    def reset(self) -> None:
        """Return to the exact initial conditions (same seed, same state)."""
        cfg = self.cfg
        self.x = (cfg.initial.phi, cfg.initial.phi_dot,
                  cfg.initial.theta, cfg.initial.theta_dot)
        self.t = 0.0
        self.step_index = 0
        self.rng = np.random.default_rng(cfg.seed)
        self.limiter = AngleLimiter()
        self.battery = EmulatedBattery(cfg.safety)
        self.theta_est = None          # complementary filter state (lazy init)
        self.prev_phi_dot = cfg.initial.phi_dot
        self.prev_u = 0.0
        self.controller = cfg.controller
        self.theta_ref_offset = cfg.theta_ref_offset
        # Gear-play state: motor-side angle/velocity shadow the wheel when
        # the flank is engaged.
        self.gear_engaged = True
        self.motor_phi = cfg.initial.phi
        self.motor_phi_dot = cfg.initial.phi_dot
        self.last_torque = 0.0

    # -- controller -------------------------------------------------------

    def _control_law(self, x) -> float:
        ctl = self.controller
        phi, phi_d, th, th_d = x
        theta_ref = ctl.theta_ref + self.theta_ref_offset
        if ctl.mode == "velocity_ref":
            return ctl.phi_dot_ref
        if ctl.mode == "lqr4":
            k = ctl.gains.k
            phi_ref = ctl.p_ref / self.params.r - theta_ref
            err = (phi - phi_ref, phi_d, th - theta_ref, th_d)
            return -sum(ki * ei for ki, ei in zip(k, err))
        # cascade: outer P position loop commands the pitch reference
        p = self.params.r * (phi + th)
        theta_cmd = ctl.kp_pos * (ctl.p_ref - p) + theta_ref
        k = ctl.gains.k
        return -(k[0] * phi_d + k[1] * (th - theta_cmd) + k[2] * th_d)

    # -- physics with optional gear play -----------------------------------

    def _advance_physics(self, u_ref: float, enabled: bool) -> float:
        """Advance one control period; returns the representative torque."""
        cfg, params = self.cfg, self.params
        dt = cfg.dt_physics
        rep_torque = None
        for _ in range(cfg.substeps):
            if not enabled:
                torque = 0.0
                self.x = _rk4(lambda xx: _torque_mode_rates(xx, 0.0, params),
                              self.x, dt)
                self._sync_motor_side()
            elif cfg.backlash_halfwidth > 0.0:
                torque = self._backlash_substep(u_ref, dt)
            else:
                state, torque = self._plain_substep(u_ref, dt)
            if rep_torque is None:
                rep_torque = torque
        self.last_torque = rep_torque if rep_torque is not None else 0.0
        return self.last_torque

    def _plain_substep(self, u_ref: float, dt: float):
        params, cfg = self.params, self.cfg
        _, torque = _velocity_mode_rates(self.x, u_ref, params)
        if cfg.torque_limit > 0.0 and abs(torque) > cfg.torque_limit:
            torque = math.copysign(cfg.torque_limit, torque)
            self.x = _rk4(lambda xx: _torque_mode_rates(xx, torque, params),
                          self.x, dt)
        else:
            self.x = _rk4(lambda xx: _velocity_mode_rates(xx, u_ref, params)[0],
                          self.x, dt)
        self._sync_motor_side()
        return self.x, torque

    def _sync_motor_side(self) -> None:
        """Keep the motor shadow at the current flank while engaged."""
        if self.cfg.backlash_halfwidth <= 0.0:
            return
        b = self.cfg.backlash_halfwidth
        gap = self.motor_phi - self.x[0]
        gap = max(-b, min(b, gap))
        self.motor_phi = self.x[0] + gap
        self.motor_phi_dot = self.x[1]

    def _backlash_substep(self, u_ref: float, dt: float) -> float:
        """Gear play: torque transmits only with a pressed flank.

        The motor side follows the velocity loop exactly (first-order in
        motor speed); the wheel either moves with it (flank pressed, the
        coupled velocity-mode step) or coasts torque-free until the gap
        closes on the other flank.
        """
        params, cfg = self.params, self.cfg
        b = cfg.backlash_halfwidth
        gap = self.motor_phi - self.x[0]
        engaged = abs(gap) >= b * (1.0 - 1e-12)
        if engaged:
            flank = math.copysign(1.0, gap)
            _, torque = _velocity_mode_rates(self.x, u_ref, params)
            if torque * flank >= 0.0:
                # Flank pressed: wheel and motor move together.
                _, torque = self._plain_substep(u_ref, dt)
                self.motor_phi = self.x[0] + flank * b
                self.motor_phi_dot = self.x[1]
                return torque
        # Disengaged: wheel coasts, motor side advances on its own.
        a = math.exp(-dt / params.t_em)
        new_mdot = a * self.motor_phi_dot + (1.0 - a) * params.K * u_ref
        self.motor_phi += params.K * u_ref * dt \
            - params.t_em * (new_mdot - self.motor_phi_dot)
        self.motor_phi_dot = new_mdot
        self.x = _rk4(lambda xx: _torque_mode_rates(xx, 0.0, params),
                      self.x, dt)
        gap = self.motor_phi - self.x[0]
        if abs(gap) >= b:
            # Contact on a flank: inelastic engagement snaps the wheel
            # speed to the motor side.
            flank = math.copysign(1.0, gap)
            self.x = (self.motor_phi - flank * b, self.motor_phi_dot,
                      self.x[2], self.x[3])
        return 0.0

    # -- one control step ---------------------------------------------------

    def control_step(self) -> TelemetryFrame:
        cfg, params = self.cfg, self.params
        x = self.x
        # Instantaneous accelerations under the held command (sensors read
        # the world as shaped by the previous interval's actuation).
        if self.limiter.ok:
            rates, _ = _velocity_mode_rates(x, self.prev_u, params)
        else:
            rates = _torque_mode_rates(x, 0.0, params)
        p_dd = params.r * (rates[1] + rates[3])
        state = PlantState(*x)
        a_x, a_z, gyro = imu_emulate(state, p_dd, rates[3], cfg.imu_noise,
                                     self.rng, params.g)
        if self.theta_est is None:
            self.theta_est = math.atan2(a_x, a_z)
        else:
            self.theta_est = complementary_filter(
                self.theta_est, gyro, a_x, a_z, cfg.dt_control,
                cfg.filter_alpha)

        phi_dd_obs = (x[1] - self.prev_phi_dot) / cfg.dt_control
        self.prev_phi_dot = x[1]
        delta_p_dd, slipping = slip_monitor(
            a_x, a_z, self.theta_est, phi_dd_obs, params.r,
            cfg.safety.slip_threshold)
        angle_ok = self.limiter(self.theta_est)
        battery_low = battery_monitor(self.battery.cells,
                                      cfg.safety.cell_low_volts)
        enabled = angle_ok and not slipping

        if enabled:
            feedback = x if cfg.feedback_source == "true_state" else (
                x[0], x[1], self.theta_est, x[3])
            u = self._control_law(feedback)
        else:
            u = 0.0
        torque = self._advance_physics(u, enabled)
        self.prev_u = u if enabled else 0.0
        self.battery.draw(torque, cfg.dt_control)
        self.t = round((self.step_index + 1) * cfg.dt_control, 12)
        self.step_index += 1

        if not all(map(math.isfinite, self.x)) \
                or max(abs(v) for v in self.x) > DIVERGENCE_LIMIT:
            raise SimulationDivergedError(
                f"state diverged at t = {self.t:.6f} s", time=self.t)

        state = PlantState(*self.x)
        return TelemetryFrame(
            t=self.t, state=state, p=state.position(params), u=u,
            torque=torque, theta_est=self.theta_est,
            safety=SafetyStatus(motors_enabled=enabled, angle_ok=angle_ok,
                                slip_detected=slipping,
                                battery_low=battery_low,
                                delta_p_ddot=delta_p_dd))


def run_experiment(cfg: SimConfig,
                   params: RobotParams | None = None) -> list[TelemetryFrame]:
    """Run a full closed-loop experiment and return all telemetry frames."""
    sim = Simulator(cfg, params)
    n_steps = int(round(cfg.duration / cfg.dt_control))
    return [sim.control_step() for _ in range(n_steps)]


# ---------------------------------------------------------------------------
# config and telemetry serialization
# ---------------------------------------------------------------------------

def config_to_dict(cfg: SimConfig) -> dict:
    d = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "duration": cfg.duration,
        "dt_physics": cfg.dt_physics,
        "dt_control": cfg.dt_control,
        "initial": {"phi": cfg.initial.phi, "phi_dot": cfg.initial.phi_dot,
                    "theta": cfg.initial.theta,
                    "theta_dot": cfg.initial.theta_dot},
        "controller": {
            "mode": cfg.controller.mode,
            "kp_pos": cfg.controller.kp_pos,
            "p_ref": cfg.controller.p_ref,
            "theta_ref": cfg.controller.theta_ref,
            "phi_dot_ref": cfg.controller.phi_dot_ref,
        },
        "backlash_halfwidth": cfg.backlash_halfwidth,
        "torque_limit": cfg.torque_limit,
        "imu_noise": {"accel_sigma": cfg.imu_noise.accel_sigma,
                      "gyro_sigma": cfg.imu_noise.gyro_sigma},
        "seed": cfg.seed,
        "theta_ref_offset": cfg.theta_ref_offset,
        "filter_alpha": cfg.filter_alpha,
        "feedback_source": cfg.feedback_source,
        "safety": {
            "slip_threshold": cfg.safety.slip_threshold,
            "cell_low_volts": cfg.safety.cell_low_volts,
            "cell_full_volts": cfg.safety.cell_full_volts,
            "cell_count": cfg.safety.cell_count,
            "battery_drain_v_per_nms": cfg.safety.battery_drain_v_per_nms,
        },
    }
    if cfg.controller.gains is not None:
        d["controller"]["gains"] = list(cfg.controller.gains.k)
        d["controller"]["states"] = list(cfg.controller.gains.states)
    return d


def config_from_dict(d: dict) -> SimConfig:
    if d.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise InvalidInputError(
            f"unsupported config schema_version {d.get('schema_version')!r}")
    try:
        ctl = d["controller"]
        gains = None
        if "gains" in ctl:
            k = tuple(ctl["gains"])
            states = tuple(ctl.get(
                "states", ("phi", "phi_dot", "theta", "theta_dot")[:len(k)]))
            gains = GainVector(k=k, states=states)
        controller = ControllerConfig(
            mode=ctl.get("mode", "lqr4"), gains=gains,
            kp_pos=float(ctl.get("kp_pos", 0.4)),
            p_ref=float(ctl.get("p_ref", 0.0)),
            theta_ref=float(ctl.get("theta_ref", 0.0)),
            phi_dot_ref=float(ctl.get("phi_dot_ref", 0.0)))
        init = d.get("initial", {})
        noise = d.get("imu_noise", {})
        saf = d.get("safety", {})
        return SimConfig(
            duration=float(d["duration"]),
            controller=controller,
            dt_physics=float(d.get("dt_physics", 1e-3)),
            dt_control=float(d.get("dt_control", 5e-3)),
            initial=PlantState(
                phi=float(init.get("phi", 0.0)),
                phi_dot=float(init.get("phi_dot", 0.0)),
                theta=float(init.get("theta", 0.0)),
                theta_dot=float(init.get("theta_dot", 0.0))),
            backlash_halfwidth=float(d.get("backlash_halfwidth", 0.0)),
            torque_limit=float(d.get("torque_limit", 0.0)),
            imu_noise=ImuNoise(
                accel_sigma=float(noise.get("accel_sigma", 0.0)),
                gyro_sigma=float(noise.get("gyro_sigma", 0.0))),
            seed=int(d.get("seed", 0)),
            theta_ref_offset=float(d.get("theta_ref_offset", 0.0)),
            filter_alpha=float(d.get("filter_alpha", 0.98)),
            feedback_source=str(d.get("feedback_source", "true_state")),
            safety=SafetyConfig(
                slip_threshold=float(saf.get("slip_threshold",
                                             DEFAULT_SLIP_THRESHOLD)),
                cell_low_volts=float(saf.get("cell_low_volts",
                                             DEFAULT_CELL_LOW_VOLTS)),
                cell_full_volts=float(saf.get("cell_full_volts",
                                              DEFAULT_CELL_FULL_VOLTS)),
                cell_count=int(saf.get("cell_count", DEFAULT_CELL_COUNT)),
                battery_drain_v_per_nms=float(
                    saf.get("battery_drain_v_per_nms",
                            DEFAULT_BATTERY_DRAIN))))
    except KeyError as exc:
        raise InvalidInputError(f"config missing required field {exc}") from exc


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: SimConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def telemetry_to_csv(frames) -> str:
    """Render frames as the canonical telemetry CSV (repr-exact floats)."""
    lines = [TELEMETRY_CSV_HEADER]
    for f in frames:
        s = f.state
        lines.append(",".join([
            repr(float(f.t)), repr(s.phi), repr(s.phi_dot), repr(s.theta),
            repr(s.theta_dot), repr(float(f.p)), repr(float(f.u)),
            repr(float(f.torque)), repr(float(f.theta_est)),
            str(int(f.safety.motors_enabled)),
            str(int(f.safety.slip_detected)),
            str(int(f.safety.battery_low))]))
    return "\n".join(lines) + "\n"


def write_telemetry_csv(frames, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(telemetry_to_csv(frames))
