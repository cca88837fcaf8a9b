"""Classical SISO analysis of the stabilized robot.

With the 3-state balance controller closed, the remaining loop from pitch
reference to position is a SISO plant: a free integrator (the wheel angle
is uncontrolled) plus a right-half-plane zero (the robot backs up before
driving forward).  The tools here make those visible: pole/zero sets,
root locus, Nyquist curve with margins, the critical proportional gain,
and step responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import CrossingNotFoundError, InvalidInputError
from .identification import TimeSeries
from .model import RationalTF, StateSpace
from .synthesis import FEEDBACK_CONVENTION, GainVector

# Default omega grid brackets every pole of the reference design
# (fastest around 30 rad/s) with two decades of headroom.
DEFAULT_OMEGA_MIN = 1e-2
DEFAULT_OMEGA_MAX = 1e3
DEFAULT_OMEGA_POINTS = 400

DEFAULT_LOCUS_KMIN = 1e-3
DEFAULT_LOCUS_KMAX = 1e2
DEFAULT_LOCUS_POINTS = 500


@dataclass(frozen=True)
class LocusBranch:
    """Root-locus data: pole tracks over a log-spaced gain grid.

    tracks[i, j] is pole j at gains[i]; each column is continuity-matched
    so it starts (k -> 0+) at an open-loop pole.
    """

    gains: np.ndarray
    tracks: np.ndarray

    @property
    def n_branches(self) -> int:
        return self.tracks.shape[1]


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled G(j omega) plus stability margins.

    gain_margin is a linear ratio (amplification still tolerated at the
    phase crossover); phase_margin is in degrees.  Margins without a
    crossover are reported as math.inf with crossover frequency None.
    """

    omega: np.ndarray
    value: np.ndarray
    gain_margin: float
    phase_margin_deg: float
    gain_crossover: float | None
    phase_crossover: float | None

    @property
    def gain_margin_db(self) -> float:
        if math.isinf(self.gain_margin):
            return math.inf
        return 20.0 * math.log10(self.gain_margin)


def closed_loop_siso(sys: StateSpace, k3: GainVector) -> RationalTF:
    """Position loop theta_ref -> p with the balance controller closed.

    The 3-state law u = -k . (phi_dot, theta - theta_ref, theta_dot)
    embeds as full-state feedback [0, k1, k2, k3]; the reference enters
    through B k2.  The wheel angle stays uncontrolled, so the denominator
    keeps an exact integrator factor s.
    """
    if len(k3.k) != 3:
        raise InvalidInputError("closed_loop_siso needs a 3-state gain")
    if k3.convention != FEEDBACK_CONVENTION:
        raise InvalidInputError(
            f"unexpected feedback convention {k3.convention!r}")
    k1, k2, kth = k3.k
    k_full = np.array([0.0, k1, k2, kth])
    A_cl = sys.A - sys.B @ k_full[None, :]
    b_ref = (sys.B * k2).ravel()
    c_row = sys.C[0, :]
    _, N = numerics.resolvent_expansion(A_cl)
    num = np.array([c_row @ Nk @ b_ref for Nk in N])
    if np.all(A_cl[:, 0] == 0.0):
        # phi column is exactly zero: factor the integrator out exactly so
        # the denominator's constant term is 0 by construction.
        den = np.polymul(numerics.charpoly(A_cl[1:, 1:]), [1.0, 0.0])
    else:
        den = numerics.charpoly(A_cl)
    return RationalTF(num, den)


def proportional_closure(G: RationalTF, k: float) -> RationalTF:
    """Unity-feedback closure k G / (1 + k G)."""
    num, den = _aligned(G)
    return RationalTF(k * num, den + k * num)


def _aligned(G: RationalTF):
    """num zero-padded to the denominator length (proper TFs only)."""
    num, den = np.asarray(G.num), np.asarray(G.den)
    if num.size > den.size:
        raise InvalidInputError("improper transfer function")
    return np.concatenate([np.zeros(den.size - num.size), num]), den.copy()


def root_locus(G: RationalTF, k_min: float = DEFAULT_LOCUS_KMIN,
               k_max: float = DEFAULT_LOCUS_KMAX,
               n_points: int = DEFAULT_LOCUS_POINTS) -> LocusBranch:
    """Pole tracks of den + k num over a log-spaced gain grid.

    Branches are matched greedily between consecutive gains by nearest
    neighbor, which is adequate at the system orders used here (n <= 4).
    """
    if k_min <= 0.0 or k_max <= k_min:
        raise InvalidInputError("need 0 < k_min < k_max")
    if n_points < 2:
        raise InvalidInputError("need at least two gain points")
    num, den = _aligned(G)
    gains = np.logspace(np.log10(k_min), np.log10(k_max), n_points)
    n_poles = den.size - 1
    tracks = np.empty((n_points, n_poles), dtype=complex)
    previous = np.sort_complex(numerics.poly_roots(den))
    for i, k in enumerate(gains):
        roots = list(numerics.poly_roots(den + k * num))
        ordered = []
        for p in previous:
            j = min(range(len(roots)), key=lambda idx: abs(roots[idx] - p))
            ordered.append(roots.pop(j))
        tracks[i, :] = ordered
        previous = tracks[i, :]
    return LocusBranch(gains=gains, tracks=tracks)


def nyquist(G: RationalTF, omega_grid=None) -> FrequencyResponse:
    """Frequency response samples plus gain/phase margins.

    Crossovers are located by linear interpolation between grid points
    (phase for the gain margin, magnitude for the phase margin); the
    most restrictive crossing wins.  Grids must start above omega = 0 so
    integrator poles stay off the evaluation axis.
    """
    if omega_grid is None:
        omega_grid = np.logspace(np.log10(DEFAULT_OMEGA_MIN),
                                 np.log10(DEFAULT_OMEGA_MAX),
                                 DEFAULT_OMEGA_POINTS)
    omega = np.asarray(omega_grid, dtype=float)
    if omega.ndim != 1 or omega.size < 2:
        raise InvalidInputError("omega grid must be a 1-D array")
    if omega[0] <= 0.0 or np.any(np.diff(omega) <= 0.0):
        raise InvalidInputError("omega grid must be positive and increasing")
    value = G(1j * omega)
    mag = np.abs(value)
    phase = np.unwrap(np.angle(value))

    gain_margin = math.inf
    phase_crossover = None
    # Phase crossings of -180 deg (mod 360): track distance to the nearest
    # odd multiple of pi.
    rel = (phase + np.pi) / (2.0 * np.pi)
    for i in range(omega.size - 1):
        lo, hi = rel[i], rel[i + 1]
        for level in range(int(np.floor(min(lo, hi))), int(np.ceil(max(lo, hi))) + 1):
            if (lo - level) * (hi - level) <= 0.0 and lo != hi:
                frac = (level - lo) / (hi - lo)
                w = omega[i] * (omega[i + 1] / omega[i]) ** frac
                m = np.interp(np.log(w), np.log(omega[i:i + 2]), mag[i:i + 2])
                if m > 0.0 and 1.0 / m < gain_margin:
                    gain_margin = 1.0 / m
                    phase_crossover = float(w)

    phase_margin = math.inf
    gain_crossover = None
    logm = np.log(np.maximum(mag, 1e-300))
    for i in range(omega.size - 1):
        if logm[i] == logm[i + 1]:
            continue
        if logm[i] * logm[i + 1] <= 0.0 and (logm[i] != 0.0 or logm[i + 1] != 0.0):
            frac = (0.0 - logm[i]) / (logm[i + 1] - logm[i])
            if not 0.0 <= frac <= 1.0:
                continue
            w = omega[i] * (omega[i + 1] / omega[i]) ** frac
            ph = phase[i] + frac * (phase[i + 1] - phase[i])
            pm = math.degrees(ph) + 180.0
            # Fold to the principal margin around this crossing.
            pm = (pm + 180.0) % 360.0 - 180.0
            if math.isinf(phase_margin) or abs(pm) < abs(phase_margin):
                phase_margin = pm
                gain_crossover = float(w)

    return FrequencyResponse(omega=omega, value=value,
                             gain_margin=float(gain_margin),
                             phase_margin_deg=float(phase_margin),
                             gain_crossover=gain_crossover,
                             phase_crossover=phase_crossover)


def _max_real_root(num, den, k):
    return numerics.poly_roots(den + k * num).real.max()


def critical_gain(G: RationalTF, k_min: float = 1e-6, k_max: float = 1e4,
                  scan_points: int = 400, rel_tol: float = 1e-12) -> float:
    """Smallest k > 0 where a closed-loop root reaches the imaginary axis.

    Scans max Re(roots of den + k num) over a log grid for its first sign
    change, then bisects.  Raises CrossingNotFoundError (with the searched
    interval) when the stability verdict never changes.
    """
    num, den = _aligned(G)
    ks = np.logspace(np.log10(k_min), np.log10(k_max), scan_points)
    values = [_max_real_root(num, den, k) for k in ks]
    bracket = None
    for i in range(len(ks) - 1):
        if values[i] != 0.0 and (values[i] < 0.0) != (values[i + 1] < 0.0):
            bracket = (ks[i], ks[i + 1])
            break
    if bracket is None:
        raise CrossingNotFoundError(
            f"no stability-boundary crossing for k in [{k_min:g}, {k_max:g}]",
            interval=(k_min, k_max))
    lo, hi = bracket
    lo_sign = _max_real_root(num, den, lo) < 0.0
    while hi - lo > rel_tol * hi:
        mid = math.sqrt(lo * hi)
        if (_max_real_root(num, den, mid) < 0.0) == lo_sign:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def step_response(G: RationalTF, horizon: float, dt: float) -> TimeSeries:
    """Unit-step response by RK4 on the controllable canonical realization."""
    if dt <= 0.0 or horizon <= dt:
        raise InvalidInputError("need dt > 0 and horizon > dt")
    num, den = _aligned(G)
    n = den.size - 1
    if n == 0:
        raise InvalidInputError("static transfer function has no dynamics")
    d_term = num[0]
    resid = num - d_term * den          # strictly proper remainder
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    b = np.zeros(n)
    b[0] = 1.0
    c = resid[1:]                       # descending matches companion ordering
    steps = int(round(horizon / dt))
    t = np.arange(steps + 1) * dt
    x = np.zeros(n)
    y = np.empty(steps + 1)
    y[0] = c @ x + d_term

    def f(x):
        return A @ x + b

    for i in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        y[i + 1] = c @ x + d_term
    return TimeSeries(t=t, u=np.ones(steps + 1), y=y)
