"""Controller synthesis: PI pole placement and LQR state feedback.

All gains follow the convention u = -k . x_tilde; the convention string is
carried on the gain container so downstream consumers (simulator, service,
UI) never guess the sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InfeasiblePlacementError, InvalidInputError
from .identification import FirstOrderFit
from .model import RationalTF, StateSpace

FEEDBACK_CONVENTION = "u = -k.x"

# 3-state balance controller acts on (phi_dot, theta, theta_dot).
BALANCE_STATE_INDICES = (1, 2, 3)
BALANCE_STATE_LABELS = ("phi_dot", "theta", "theta_dot")

# Settling time is read as five time constants of the dominant pole.
SETTLE_TIME_CONSTANTS = 5.0

CONTROLLABILITY_RANK_TOL = 1e-10


@dataclass(frozen=True)
class PIGains:
    """Proportional-integral gains for the wheel-velocity loop."""

    kp: float
    ki: float

    def __post_init__(self):
        if not (np.isfinite(self.kp) and np.isfinite(self.ki)):
            raise InvalidInputError("PI gains must be finite")
        if self.ki < 0.0:
            raise InvalidInputError("integral gain must be >= 0")


@dataclass(frozen=True)
class LQRWeights:
    """Diagonal state weights and scalar input weight of the quadratic cost."""

    q_diag: tuple
    r: float

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_diag)
        if any(v < 0.0 for v in q):
            raise InvalidInputError("Q diagonal entries must be >= 0")
        if not self.r > 0.0:
            raise InvalidInputError("R must be > 0")
        object.__setattr__(self, "q_diag", q)

    @property
    def n_states(self) -> int:
        return len(self.q_diag)


@dataclass(frozen=True)
class GainVector:
    """State-feedback gains with their convention and state labels."""

    k: tuple
    states: tuple
    convention: str = FEEDBACK_CONVENTION

    def __post_init__(self):
        k = tuple(float(v) for v in self.k)
        if len(k) != len(self.states):
            raise InvalidInputError("gain length must match state labels")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "states", tuple(self.states))

    def as_array(self) -> np.ndarray:
        return np.array(self.k)


def pi_pole_placement(plant: FirstOrderFit, settle_time: float,
                      max_natural_freq: float) -> PIGains:
    """Place the velocity-loop poles from a settling-time/bandwidth spec.

    The loop of PI controller and first-order plant has characteristic
    polynomial  tau s^2 + (1 + K_m Kp) s + K_m Ki.  The dominant pole goes
    to -5/settle_time (settling read as five time constants) and the fast
    pole to -max_natural_freq; two real poles keep the actuator from
    exciting high frequencies.  Integral action pins the closed-loop DC
    gain to exactly 1.
    """
    if settle_time <= 0.0:
        raise InvalidInputError("settle_time must be positive")
    s_dom = -SETTLE_TIME_CONSTANTS / settle_time
    if max_natural_freq <= -s_dom:
        raise InvalidInputError(
            f"max_natural_freq must exceed the dominant pole {-s_dom:.4g}")
    s_fast = -max_natural_freq
    tau, km = plant.tau, plant.gain
    kp = (tau * (-s_dom - s_fast) - 1.0) / km
    ki = tau * s_dom * s_fast / km
    damping = 1.0 + km * kp
    if damping <= 0.0 or ki <= 0.0:
        raise InfeasiblePlacementError(
            f"placement yields damping coefficient {damping:.4g} and "
            f"Ki {ki:.4g}; poles are not realizable with this plant")
    return PIGains(kp=float(kp), ki=float(ki))


def velocity_loop_tf(plant: FirstOrderFit, gains: PIGains) -> RationalTF:
    """Closed velocity loop K_m (Kp s + Ki) / (tau s^2 + (1+K_m Kp) s + K_m Ki)."""
    km, tau = plant.gain, plant.tau
    num = [km * gains.kp, km * gains.ki]
    den = [tau, 1.0 + km * gains.kp, km * gains.ki]
    return RationalTF(num, den)


def reduce_to_balance_states(sys: StateSpace):
    """(A, B) restricted to (phi_dot, theta, theta_dot)."""
    idx = list(BALANCE_STATE_INDICES)
    return sys.A[np.ix_(idx, idx)], sys.B[idx, :]


def lqr(sys: StateSpace, weights: LQRWeights,
        tol: float = numerics.CARE_RESIDUAL_TOL) -> GainVector:
    """LQR gain k = R^-1 B' P for the full system or its 3-state reduction.

    A 3-entry weight vector selects the balance-state reduction
    (phi_dot, theta, theta_dot); a 4-entry one uses the full model.  The
    returned closed loop A - B k is Hurwitz (verified by the CARE solver).
    """
    if weights.n_states == sys.n_states:
        A, B = sys.A, sys.B
        states = tuple(sys.state_labels)
    elif weights.n_states == 3 and sys.n_states == 4:
        A, B = reduce_to_balance_states(sys)
        states = BALANCE_STATE_LABELS
    else:
        raise InvalidInputError(
            f"cannot apply {weights.n_states} weights to a "
            f"{sys.n_states}-state system")
    Q = np.diag(weights.q_diag)
    R = np.array([[weights.r]])
    P = numerics.solve_care(A, B, Q, R, tol=tol)
    k = np.linalg.solve(R, B.T @ P).ravel()
    return GainVector(k=tuple(k), states=states)


def controllability(sys: StateSpace):
    """Controllability matrix [B, AB, ..., A^(n-1) B] and its numerical rank."""
    A, B = sys.A, sys.B
    blocks = [B]
    for _ in range(sys.n_states - 1):
        blocks.append(A @ blocks[-1])
    Co = np.hstack(blocks)
    return Co, numerics.matrix_rank(Co, tol=CONTROLLABILITY_RANK_TOL)
