"""First-order system identification from step-response data.

The wheel-velocity dynamics of the drivetrain are identified as a first
order lag  G(s) = K_m / (tau s + 1)  from sampled input/output records.
The regression runs on the exact zero-order-hold discretization

    y[k+1] = a y[k] + b u[k],    a = exp(-dt/tau),  b = K_m (1 - a)

so that noise-free synthetic data is recovered exactly.  The fitter is
unit-agnostic: u may be volts (raw motor) or rad/s (closed-loop check).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import IdentifiabilityError, InvalidInputError, ModelMismatchError

# Sampling jitter above this fraction of dt triggers resampling.
UNIFORM_JITTER_TOL = 1e-9

# Default synthetic experiment: +-1 V square wave at 1 Hz.  The richer
# excitation keeps the equation-error regression well conditioned under
# output noise (a single step leaves tau badly biased).
DEFAULT_SQUARE_AMPLITUDE = 1.0
DEFAULT_SQUARE_PERIOD = 1.0
DEFAULT_EXPERIMENT_DURATION = 4.0
DEFAULT_EXPERIMENT_DT = 5e-3


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled input/output record."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if not (t.size == u.size == y.size):
            raise InvalidInputError("t, u, y must have equal lengths")
        if t.size < 8:
            raise InvalidInputError("need at least 8 samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("sample times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def is_uniform(self) -> bool:
        steps = np.diff(self.t)
        return bool(np.abs(steps - steps[0]).max() <= UNIFORM_JITTER_TOL * steps[0]
                    + UNIFORM_JITTER_TOL)

    def resampled(self) -> "TimeSeries":
        """Linear-interpolation resample onto a uniform grid."""
        if self.is_uniform():
            return self
        n = self.t.size
        grid = np.linspace(self.t[0], self.t[-1], n)
        return TimeSeries(grid, np.interp(grid, self.t, self.u),
                          np.interp(grid, self.t, self.y))


@dataclass(frozen=True)
class FirstOrderFit:
    """Identified first-order lag: gain, time constant, residual RMS."""

    gain: float
    tau: float
    residual_rms: float = 0.0

    def __post_init__(self):
        if not self.tau > 0.0:
            raise InvalidInputError("time constant must be positive")


def fit_first_order(data: TimeSeries) -> FirstOrderFit:
    """Least-squares fit of the ZOH-discretized first-order model.

    Raises IdentifiabilityError when the input never moves (or the record
    holds only settled steady state, where only the DC gain is visible)
    and ModelMismatchError when the fitted pole leaves (0, 1).
    """
    data = data.resampled()
    u, y = data.u, data.y
    if np.abs(np.diff(u)).max(initial=0.0) == 0.0:
        raise IdentifiabilityError(
            "input is constant: tau is unidentifiable "
            f"(DC gain alone would be {y[-1] / u[-1]:.6g})" if u[-1] != 0.0
            else "input is constant and zero: nothing to identify")
    X = np.column_stack([y[:-1], u[:-1]])
    target = y[1:]
    gram = X.T @ X
    det = gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]
    scale = gram[0, 0] * gram[1, 1]
    if det <= 1e-12 * max(scale, 1e-300):
        dc = y[-1] / u[-1] if u[-1] != 0.0 else float("nan")
        raise IdentifiabilityError(
            "regressors are collinear (steady-state-only record?); "
            f"only the DC gain {dc:.6g} is identifiable")
    a, b = np.linalg.solve(gram, X.T @ target)
    if not 0.0 < a < 1.0:
        raise ModelMismatchError(
            f"fitted discrete pole a={a:.6g} outside (0, 1); data does not "
            "look like a stable first-order lag at this sample rate")
    residual = target - X @ np.array([a, b])
    return FirstOrderFit(gain=float(b / (1.0 - a)),
                         tau=float(-data.dt / np.log(a)),
                         residual_rms=float(np.sqrt(np.mean(residual ** 2))))


def generate_step_experiment(plant: FirstOrderFit, steps, dt: float,
                             noise_sigma: float = 0.0, seed: int = 0,
                             duration: float | None = None) -> TimeSeries:
    """Synthetic step-sequence experiment on a first-order plant.

    `steps` is a list of (time, level) pairs; the input holds each level
    until the next entry.  Output noise is additive Gaussian, generated
    from `seed`, so identical arguments give bit-identical records.
    """
    if dt <= 0.0:
        raise InvalidInputError("dt must be positive")
    steps = sorted((float(ts), float(lvl)) for ts, lvl in steps)
    if not steps:
        raise InvalidInputError("need at least one step")
    if duration is None:
        duration = steps[-1][0] + 1.0
    n = int(round(duration / dt)) + 1
    t = np.arange(n) * dt
    u = np.zeros(n)
    for ts, lvl in steps:
        u[t >= ts - 1e-12] = lvl
    a = np.exp(-dt / plant.tau)
    b = plant.gain * (1.0 - a)
    y = np.zeros(n)
    for k in range(n - 1):
        y[k + 1] = a * y[k] + b * u[k]
    if noise_sigma > 0.0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, size=n)
    return TimeSeries(t, u, y)


def default_square_wave(duration: float = DEFAULT_EXPERIMENT_DURATION,
                        amplitude: float = DEFAULT_SQUARE_AMPLITUDE,
                        period: float = DEFAULT_SQUARE_PERIOD):
    """Step list for the default +-amplitude square-wave excitation."""
    half = period / 2.0
    n_edges = int(np.ceil(duration / half))
    return [(i * half, amplitude if i % 2 == 0 else -amplitude)
            for i in range(n_edges)]


def write_timeseries_csv(data: TimeSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "u", "y"])
        for row in zip(data.t, data.u, data.y):
            writer.writerow([repr(float(v)) for v in row])


def read_timeseries_csv(path) -> TimeSeries:
    t, u, y = [], [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "u", "y"]:
            raise InvalidInputError(f"{path}: expected header 't,u,y'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                t.append(float(row[0]))
                u.append(float(row[1]))
                y.append(float(row[2]))
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
    return TimeSeries(np.array(t), np.array(u), np.array(y))
