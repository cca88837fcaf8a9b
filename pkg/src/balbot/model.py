"""Physical model of the balancing robot.

The robot is a two-wheeled inverted pendulum in the lateral plane: wheels
of radius r (assumed weightless), body of mass m whose center of mass sits
a distance l above the axle, gravity g.  The wheel angle phi is measured
relative to the body, so the longitudinal position is p = r (phi + theta).
The Lagrangian formalism with generalized coordinates (p, theta) and the
combined motor torque T as generalized force yields

    r l m cos(theta) theta_dd + r m p_dd - r l m sin(theta) theta_d^2 = T
    2 l^2 m theta_dd + l m cos(theta) p_dd - g l m sin(theta)         = -T

The wheel-velocity control loop on the motors is abstracted as a first
order lag  phi_dd = (K u - phi_d) / t_EM  with u the commanded wheel
speed.  Linearizing about the upright equilibrium and combining both gives
the 4-state linear system produced by :func:`linearize`.

Angles are radians everywhere; degree conversions belong to CLI/UI code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InvalidInputError

STATE_LABELS = ("phi", "phi_dot", "theta", "theta_dot")
OUTPUT_LABELS = ("p", "theta")
INPUT_LABELS = ("phi_dot_ref",)

# Cancel a numerator/denominator root pair only when this close.
POLE_ZERO_CANCEL_TOL = 1e-7


@dataclass(frozen=True)
class RobotParams:
    """Physical constants plus the velocity-loop closure.

    m    : body mass [kg]
    r    : wheel radius [m]
    l    : center-of-mass distance above the axle [m]
    g    : gravity [m/s^2]
    K    : velocity-loop DC gain [-]
    t_em : velocity-loop time constant [s]
    """

    m: float = 0.933
    r: float = 0.04
    l: float = 0.0857
    g: float = 9.81
    K: float = 1.0
    t_em: float = 0.0994

    def __post_init__(self):
        for name in ("m", "r", "l", "g", "K", "t_em"):
            if not getattr(self, name) > 0.0:
                raise InvalidInputError(f"parameter {name} must be > 0")

    @property
    def eta(self) -> float:
        """Combined inertia term 2 m l + m r + 2 m l^2 / r [kg]."""
        return 2.0 * self.m * self.l + self.m * self.r \
            + 2.0 * self.m * self.l ** 2 / self.r


# File keys use the conventional symbol names; t_EM maps to the t_em field.
_PARAM_KEYS = {"m": "m", "r": "r", "l": "l", "g": "g", "K": "K", "t_EM": "t_em"}


def save_params(params: RobotParams, path) -> None:
    """Write params as a flat key-value text file (SI units)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# balancing-robot parameters (SI units)\n")
        for key, attr in _PARAM_KEYS.items():
            fh.write(f"{key} {getattr(params, attr)!r}\n")


def load_params(path) -> RobotParams:
    """Read a flat key-value parameter file written by :func:`save_params`."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("=", " ").split()
            if len(parts) != 2:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected 'key value', got {raw!r}")
            key, val = parts
            if key not in _PARAM_KEYS:
                raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[_PARAM_KEYS[key]] = float(val)
            except ValueError as exc:
                raise InvalidInputError(
                    f"{path}:{lineno}: bad number {val!r}") from exc
    missing = set(_PARAM_KEYS.values()) - set(values)
    if missing:
        raise InvalidInputError(f"{path}: missing keys {sorted(missing)}")
    return RobotParams(**values)


@dataclass
class PlantState:
    """Mechanical state (phi, phi_dot, theta, theta_dot), radians.

    phi is the wheel angle relative to the body, theta the body pitch from
    vertical.  The longitudinal position follows as p = r (phi + theta).
    """

    phi: float = 0.0
    phi_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite,
                       (self.phi, self.phi_dot, self.theta, self.theta_dot))):
            raise InvalidInputError("state entries must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.phi_dot, self.theta, self.theta_dot])

    @classmethod
    def from_array(cls, x) -> "PlantState":
        phi, phi_dot, theta, theta_dot = (float(v) for v in np.asarray(x).ravel())
        return cls(phi, phi_dot, theta, theta_dot)

    def position(self, params: RobotParams) -> float:
        """Longitudinal position p = r (phi + theta) [m]."""
        return params.r * (self.phi + self.theta)

    def velocity(self, params: RobotParams) -> float:
        """Longitudinal velocity p_dot = r (phi_dot + theta_dot) [m/s]."""
        return params.r * (self.phi_dot + self.theta_dot)


@dataclass(frozen=True)
class StateSpace:
    """Linear system x' = A x + B u, y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    state_labels: tuple = STATE_LABELS
    input_labels: tuple = INPUT_LABELS
    output_labels: tuple = OUTPUT_LABELS

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise InvalidInputError(
                f"inconsistent shapes A{A.shape} B{B.shape} C{C.shape}")
        for M, name in ((A, "A"), (B, "B"), (C, "C")):
            if not np.all(np.isfinite(M)):
                raise InvalidInputError(f"{name} contains non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return numerics.eigenvalues(self.A)


@dataclass(frozen=True)
class RationalTF:
    """Rational transfer function num(s)/den(s), monic denominator."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        den = _trim_leading(den)
        if den.size == 0 or not np.any(den):
            raise InvalidInputError("denominator must not be the zero polynomial")
        num = _trim_leading(num)
        if num.size == 0:
            num = np.zeros(1)
        # Normalize to a monic denominator.
        lead = den[0]
        object.__setattr__(self, "num", num / lead)
        object.__setattr__(self, "den", den / lead)

    def __call__(self, s):
        """Evaluate the transfer function at (array of) complex s."""
        return numerics.polyval(self.num, np.asarray(s, dtype=complex)) \
            / numerics.polyval(self.den, np.asarray(s, dtype=complex))

    def poles(self) -> np.ndarray:
        return numerics.poly_roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.num.size < 2:
            return np.empty(0, dtype=complex)
        return numerics.poly_roots(self.num)

    def dc_gain(self) -> float:
        return float(numerics.polyval(self.num, 0.0)
                     / numerics.polyval(self.den, 0.0))


def _trim_leading(coeffs, rel_tol=1e-9):
    """Drop numerically-zero leading coefficients."""
    c = np.asarray(coeffs, dtype=float).ravel()
    scale = np.abs(c).max(initial=0.0)
    if scale == 0.0:
        return c[-1:]
    k = 0
    while k < c.size - 1 and abs(c[k]) <= rel_tol * scale:
        k += 1
    return c[k:]


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def accelerations(state: PlantState, torque: float,
                  params: RobotParams) -> tuple[float, float]:
    """Nonlinear accelerations (p_dd [m/s^2], theta_dd [rad/s^2]) for torque T.

    Solves the 2x2 mass-matrix system of the two Lagrange equations.  Its
    determinant is r l^2 m^2 (2 - cos^2 theta) >= r l^2 m^2 > 0, so the
    solve never degenerates.
    """
    m, r, l, g = params.m, params.r, params.l, params.g
    c = math.cos(state.theta)
    s = math.sin(state.theta)
    # [r m, r l m c; l m c, 2 l^2 m] [p_dd; th_dd] = [T + r l m s thd^2; -T + g l m s]
    a11 = r * m
    a12 = r * l * m * c
    a21 = l * m * c
    a22 = 2.0 * l * l * m
    b1 = torque + r * l * m * s * state.theta_dot ** 2
    b2 = -torque + g * l * m * s
    det = a11 * a22 - a12 * a21
    p_dd = (a22 * b1 - a12 * b2) / det
    theta_dd = (a11 * b2 - a21 * b1) / det
    return p_dd, theta_dd


def linearize(params: RobotParams) -> StateSpace:
    """Linear model about the upright equilibrium, combined with the
    velocity loop, in state order (phi, phi_dot, theta, theta_dot).

    The only nonzero entries beyond the two integrator rows are

        A[1,1] = -1/t_EM                    (velocity loop)
        A[3,1] = (l m + r m)/(t_EM eta)
        A[3,2] = g l m / (r eta)
        B[1]   = K/t_EM
        B[3]   = -K (l m + r m)/(t_EM eta)

    with eta = 2 m l + m r + 2 m l^2 / r.  The first column is exactly
    zero: phi itself does not enter the dynamics.
    """
    m, r, l, g = params.m, params.r, params.l, params.g
    K, t_em = params.K, params.t_em
    eta = params.eta
    coupling = (l * m + r * m) / (t_em * eta)
    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[1, 1] = -1.0 / t_em
    A[2, 3] = 1.0
    A[3, 1] = coupling
    A[3, 2] = g * l * m / (r * eta)
    B = np.zeros((4, 1))
    B[1, 0] = K / t_em
    B[3, 0] = -K * coupling
    C = np.array([[r, 0.0, r, 0.0],
                  [0.0, 0.0, 1.0, 0.0]])
    return StateSpace(A, B, C)


def mechanical_energy(state: PlantState, params: RobotParams) -> float:
    """Total mechanical energy [J], referenced to the upright rest state.

    Kinetic energy of the body (point mass at distance l plus its m l^2
    rotational term, matching the equations of motion) and potential energy
    m g l (cos theta - 1), so the upright equilibrium sits at exactly 0 and
    hanging rest at -2 m g l.  Constant along torque-free trajectories.
    """
    m, l, g = params.m, params.l, params.g
    p_dot = state.velocity(params)
    th_d = state.theta_dot
    c = math.cos(state.theta)
    kinetic = 0.5 * m * p_dot ** 2 + m * l * p_dot * th_d * c + m * l * l * th_d ** 2
    potential = m * g * l * (c - 1.0)
    return kinetic + potential


def ss_to_tf(sys: StateSpace, input_index: int = 0,
             output_index: int = 0) -> RationalTF:
    """SISO transfer function C_row (sI - A)^-1 B_col.

    Uses the Faddeev-LeVerrier resolvent expansion, so the denominator is
    the characteristic polynomial of A.  Numerator/denominator roots
    closer than POLE_ZERO_CANCEL_TOL are cancelled (exactly-decoupled
    subsystems reduce to their minimal form).
    """
    if not 0 <= input_index < sys.B.shape[1]:
        raise InvalidInputError(f"input index {input_index} out of range")
    if not 0 <= output_index < sys.C.shape[0]:
        raise InvalidInputError(f"output index {output_index} out of range")
    b = sys.B[:, input_index]
    c = sys.C[output_index, :]
    den, N = numerics.resolvent_expansion(sys.A)
    num = np.array([c @ Nk @ b for Nk in N])
    return cancel_common_roots(num, den)


def cancel_common_roots(num, den, tol=POLE_ZERO_CANCEL_TOL) -> RationalTF:
    """Build a RationalTF, cancelling root pairs closer than tol."""
    num = _trim_leading(np.asarray(num, dtype=float))
    den = _trim_leading(np.asarray(den, dtype=float))
    if num.size < 2 or den.size < 2 or not np.any(num):
        return RationalTF(num, den)
    zeros = list(numerics.poly_roots(num))
    poles = list(numerics.poly_roots(den))
    kept_zeros = []
    for z in zeros:
        hit = None
        for i, p in enumerate(poles):
            if abs(z - p) < tol:
                hit = i
                break
        if hit is None:
            kept_zeros.append(z)
        else:
            poles.pop(hit)
    if len(kept_zeros) == len(zeros):
        return RationalTF(num, den)
    new_num = num[0] * numerics.poly_from_roots(kept_zeros)
    new_den = den[0] * numerics.poly_from_roots(poles)
    return RationalTF(np.real(new_num), np.real(new_den))
