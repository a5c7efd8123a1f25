"""Observables and sampling diagnostics.

Autocorrelation is estimated by direct summation with the mean removed and
lag zero normalized to one.  The integrated autocorrelation uses the
initial-positive-sequence cutoff: lags are accumulated up to and including
the first negative estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroVarianceError
from .system import PhaseState, System, degrees_of_freedom, kinetic_energy


@dataclass(frozen=True)
class TimeSeries:
    """Scalar samples spaced dt_between_samples apart."""

    values: np.ndarray
    dt_between_samples: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("a time series needs a non-empty 1-d value array")
        if not np.all(np.isfinite(values)):
            raise ValueError("time series entries must be finite")
        if self.dt_between_samples <= 0:
            raise ValueError("dt_between_samples must be positive")
        object.__setattr__(self, "values", values)


def temperature(system: System, state: PhaseState, k_boltzmann: float = 1.0) -> float:
    """Kinetic temperature 2 K / (k_B N_dof)."""
    n_dof = degrees_of_freedom(system)
    if n_dof < 1:
        raise ValueError("system has no degrees of freedom")
    return 2.0 * kinetic_energy(system, state) / (k_boltzmann * n_dof)


def _centered(series: TimeSeries) -> np.ndarray:
    x = series.values - series.values.mean()
    if np.dot(x, x) == 0.0:
        raise ZeroVarianceError("autocorrelation of a constant series is undefined")
    return x


def acf(series: TimeSeries, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation estimates for lags 0..max_lag; acf[0] = 1."""
    n = series.values.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    x = _centered(series)
    c0 = np.dot(x, x)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = np.dot(x[:-k], x[k:]) / c0
    return out


@dataclass(frozen=True)
class IacfResult:
    """Integrated autocorrelation estimate with its truncation point.

    ``truncated`` flags series whose autocorrelation never went negative
    within the scanned lags (e.g. trend-dominated data); the estimate is then
    a lower bound.
    """

    value: float
    cutoff_lag: int
    truncated: bool


def iacf(series: TimeSeries, max_lag: int | None = None) -> IacfResult:
    """dt * (1 + 2 * sum of acf up to the first negative lag inclusive).

    Lags are computed one by one, so well-behaved series stop scanning early.
    """
    n = series.values.size
    if n < 2:
        raise ValueError("iacf needs at least two samples")
    cap = n // 2 if max_lag is None else max_lag
    cap = max(1, min(cap, n - 1))
    x = _centered(series)
    c0 = np.dot(x, x)
    total = 0.0
    for k in range(1, cap + 1):
        rho_k = np.dot(x[:-k], x[k:]) / c0
        total += rho_k
        if rho_k < 0.0:
            return IacfResult(value=series.dt_between_samples * (1.0 + 2.0 * total),
                              cutoff_lag=k, truncated=False)
    return IacfResult(value=series.dt_between_samples * (1.0 + 2.0 * total),
                      cutoff_lag=cap, truncated=True)


def _per_particle(q, dimension: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size % dimension != 0:
        raise ValueError(f"flat position array of length {q.size} does not fit dimension {dimension}")
    return q.reshape(-1, dimension)


def rmsd(q_a, q_b, dimension: int, indices=None) -> float:
    """Root-mean-square per-particle distance between two structures.

    No superposition is applied: distances are taken between raw coordinates.
    """
    a = _per_particle(q_a, dimension)
    b = _per_particle(q_b, dimension)
    if a.shape != b.shape:
        raise ValueError(f"structures differ in shape: {a.shape} vs {b.shape}")
    if indices is not None:
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            raise ValueError("index subset must be non-empty")
        a, b = a[indices], b[indices]
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def rmst(trajectory, dimension: int, indices=None, stride: int = 1) -> float:
    """Maximum rmsd between any two sampled frames of a trajectory."""
    if stride < 1:
        raise ValueError("stride must be at least 1")
    frames = list(trajectory)[::stride]
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames after striding, got {len(frames)}")
    worst = 0.0
    for a in range(len(frames) - 1):
        for b in range(a + 1, len(frames)):
            worst = max(worst, rmsd(frames[a], frames[b], dimension, indices))
    return worst


def radius_of_gyration(system: System, q) -> float:
    """Mass-weighted root-mean-square distance from the center of mass."""
    pts = _per_particle(q, system.dimension)
    if pts.shape[0] != system.n_particles:
        raise ValueError(f"expected {system.n_particles} particles, got {pts.shape[0]}")
    m = system.masses
    com = (m[:, None] * pts).sum(axis=0) / m.sum()
    return float(np.sqrt(np.sum(m * np.sum((pts - com) ** 2, axis=1)) / m.sum()))


@dataclass(frozen=True)
class Histogram:
    """Bin edges and normalized frequencies; sum(frequencies * widths) = 1."""

    bin_edges: np.ndarray
    frequencies: np.ndarray
    counts: np.ndarray


def histogram(series, bin_width: float) -> Histogram:
    """Histogram on bins aligned to multiples of bin_width, normalized by
    (total samples * bin_width)."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.size == 0:
        raise ValueError("cannot histogram an empty series")
    lo = np.floor(values.min() / bin_width)
    hi = np.floor(values.max() / bin_width) + 1
    edges = np.arange(lo, hi + 1) * bin_width
    counts, _ = np.histogram(values, bins=edges)
    freq = counts / values.size / bin_width
    return Histogram(bin_edges=edges, frequencies=freq, counts=counts)
