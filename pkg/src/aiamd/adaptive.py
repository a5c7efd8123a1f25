"""Adaptive choice of the two-stage parameter b for a system and step size.

For the unit harmonic oscillator integrated with dimensionless step h, the
expected energy error of the two-stage scheme with parameter b admits the
closed-form bound

    rho(h, b) = h^4 (2 b^2 (1/2-b) h^2 + 4 b^2 - 6 b + 1)^2
                / [ 8 (2 - b h^2) (2 - (1/2-b) h^2) (1 - b (1/2-b) h^2) ],

with rho = +inf whenever the denominator product is <= 0 (an unstable
integration: the product is positive exactly where the one-step propagation
matrix has |trace| < 2).  Given the fastest harmonic period present in the
system and a step size dt, the selection minimizes the worst case of rho over
the dimensionless step range (0, h_bar], where h_bar is dt scaled by the
fastest angular frequency times a safety factor (sqrt(2) by default, the
resonance-aware Verlet safety margin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBondsError, UnstableStepSizeError
from .system import System, _pair_key

#: search range for b: smallest-error-constant member up to the Verlet-equivalent one
B_MIN = 0.1932
B_MAX = 0.25

DEFAULT_SAFETY_FACTOR = math.sqrt(2.0)
GRID_POINTS = 2000
_QUARTER_EPS = 1e-9  # treat b within this of 1/4 by the cancelled closed form

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def energy_error_bound(h, b: float):
    """The bound rho(h, b); +inf where the denominator product is <= 0.

    ``h`` may be a scalar or an array; ``b`` must lie in (0, 1/2).  At b
    exactly 1/4 the formula is 0/0 at h = sqrt(8); use
    ``energy_error_bound_verlet`` there.
    """
    if not 0.0 < b < 0.5:
        raise ValueError(f"b must lie in (0, 0.5), got {b}")
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("h must be positive")
    s = h * h
    inner = 2.0 * b * b * (0.5 - b) * s + 4.0 * b * b - 6.0 * b + 1.0
    product = (2.0 - b * s) * (2.0 - (0.5 - b) * s) * (1.0 - b * (0.5 - b) * s)
    stable = product > 0
    out = np.where(stable, s * s * inner * inner / (8.0 * np.where(stable, product, 1.0)),
                   np.inf)
    return float(out) if out.ndim == 0 else out


def energy_error_bound_verlet(h):
    """rho at b = 1/4 after algebraic cancellation: h^4 / (32 (16 - h^2)).

    Finite on (0, 4) including the removable 0/0 of the general formula at
    h = sqrt(8); +inf for h >= 4.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("h must be positive")
    s = h * h
    out = np.where(s < 16.0, s * s / (32.0 * (16.0 - s)), np.inf)
    return float(out) if out.ndim == 0 else out


def stability_limit(b: float) -> float:
    """First h > 0 at which the bound's denominator product reaches zero.

    Integrations with h beyond this point are treated as unstable.  The limit
    is maximal, 4, for the Verlet-equivalent b = 1/4 (where the double zero at
    sqrt(8) cancels against the numerator).
    """
    if not 0.0 < b < 0.5:
        raise ValueError(f"b must lie in (0, 0.5), got {b}")
    if abs(b - 0.25) < _QUARTER_EPS:
        return 4.0
    return math.sqrt(2.0 / max(b, 0.5 - b))


def bond_periods(system: System) -> list[tuple[tuple[int, int], float]]:
    """Harmonic period 2*pi*sqrt(mu/k) for every unconstrained bond.

    Constrained pairs carry no vibrational period (their mode is frozen), so
    they never enter the scan.
    """
    constrained = {_pair_key(c.i, c.j) for c in system.constraints}
    out = []
    for bond in system.bonds:
        if _pair_key(bond.i, bond.j) in constrained:
            continue
        m1 = float(system.masses[bond.i])
        m2 = float(system.masses[bond.j])
        mu = m1 * m2 / (m1 + m2)
        out.append((_pair_key(bond.i, bond.j), 2.0 * math.pi * math.sqrt(mu / bond.k_spring)))
    if not out:
        raise NoBondsError("the system has no unconstrained harmonic bonds to scan")
    return out


def dimensionless_step(dt: float, t_min: float,
                       safety_factor: float = DEFAULT_SAFETY_FACTOR) -> float:
    """h_bar = safety_factor * (2 pi / t_min) * dt."""
    if dt <= 0 or t_min <= 0 or safety_factor <= 0:
        raise ValueError("dt, t_min and safety_factor must be positive")
    return float(safety_factor * 2.0 * math.pi * dt / t_min)


def max_stable_dt(t_min: float, safety_factor: float = DEFAULT_SAFETY_FACTOR) -> float:
    """Exclusive upper bound on dt: the step size at which h_bar reaches 4."""
    return 4.0 * t_min / (safety_factor * 2.0 * math.pi)


def worst_case_error(b: float, h_bar: float, n_grid: int = GRID_POINTS) -> float:
    """max of rho(h, b) over a uniform grid of n_grid points on (0, h_bar].

    Returns +inf as soon as any h in (0, h_bar] is unstable, i.e. whenever
    h_bar reaches the stability limit of b; the continuum of unstable h
    between grid points counts, not just sampled ones.
    """
    if h_bar <= 0:
        raise ValueError("h_bar must be positive")
    if not B_MIN <= b <= B_MAX:
        raise ValueError(f"b must lie in [{B_MIN}, {B_MAX}], got {b}")
    if h_bar >= stability_limit(b):
        return math.inf
    hs = h_bar * np.arange(1, n_grid + 1) / n_grid
    if abs(b - 0.25) < _QUARTER_EPS:
        values = energy_error_bound_verlet(hs)
    else:
        values = energy_error_bound(hs, b)
    return float(np.max(values))


def _golden_section(f, lo: float, hi: float, tol: float):
    """Golden-section minimization on [lo, hi]; returns the best point seen."""
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
            if fd < best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def optimal_b(h_bar: float, n_coarse: int = 61, b_tol: float = 1e-6) -> tuple[float, float]:
    """Minimize worst_case_error over b in [B_MIN, B_MAX] for a given h_bar.

    Coarse scan followed by golden-section refinement of the best bracket.
    Raises UnstableStepSizeError when h_bar >= 4 (everything is unstable).
    """
    if h_bar <= 0:
        raise ValueError("h_bar must be positive")
    if h_bar >= 4.0:
        raise UnstableStepSizeError(h_bar)
    bs = np.linspace(B_MIN, B_MAX, n_coarse)
    values = [worst_case_error(b, h_bar) for b in bs]
    i = int(np.argmin(values))
    best_b, best_v = float(bs[i]), values[i]
    lo = float(bs[max(i - 1, 0)])
    hi = float(bs[min(i + 1, n_coarse - 1)])
    gb, gv = _golden_section(lambda b: worst_case_error(b, h_bar), lo, hi, b_tol)
    if gv < best_v:
        best_b, best_v = gb, gv
    return best_b, best_v


@dataclass(frozen=True)
class AiaResult:
    """Outcome of the adaptive selection."""

    t_min: float
    h_bar: float
    b_opt: float
    objective: float
    safety_factor: float

    def __post_init__(self):
        if not 0.0 < self.h_bar < 4.0:
            raise ValueError(f"h_bar must lie in (0, 4), got {self.h_bar}")
        if not B_MIN <= self.b_opt <= B_MAX:
            raise ValueError(f"b_opt {self.b_opt} outside [{B_MIN}, {B_MAX}]")
        if not math.isfinite(self.objective) or self.objective < 0:
            raise ValueError(f"objective must be finite and nonnegative, got {self.objective}")


def select_b(system: System, dt: float,
             safety_factor: float = DEFAULT_SAFETY_FACTOR) -> AiaResult:
    """Pick the two-stage parameter for a system and step size.

    Scans all unconstrained bonds for the fastest period, forms the
    safety-scaled dimensionless step, aborts if it reaches 4 (no stable family
    member exists), and otherwise minimizes the worst-case energy-error bound.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t_min = min(period for _, period in bond_periods(system))
    h_bar = dimensionless_step(dt, t_min, safety_factor)
    if h_bar >= 4.0:
        raise UnstableStepSizeError(h_bar, dt=dt, dt_max=max_stable_dt(t_min, safety_factor))
    b_opt, objective = optimal_b(h_bar)
    return AiaResult(t_min=t_min, h_bar=h_bar, b_opt=b_opt, objective=objective,
                     safety_factor=safety_factor)


@dataclass(frozen=True)
class TimestepCheck:
    """Status of one bond under the Verlet step-size rules."""

    pair: tuple[int, int]
    period: float
    status: str  # "ok" | "warning" | "error"


def verlet_timestep_check(system: System, dt: float) -> list[TimestepCheck]:
    """Classify every bond period T against dt: error if T <= 5 dt, warning if
    T <= 10 dt, ok otherwise.  The scan always covers all bonds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    checks = []
    for pair, period in bond_periods(system):
        if period <= 5.0 * dt:
            status = "error"
        elif period <= 10.0 * dt:
            status = "warning"
        else:
            status = "ok"
        checks.append(TimestepCheck(pair=pair, period=period, status=status))
    return checks
