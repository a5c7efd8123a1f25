"""MD and hybrid Monte Carlo drivers on top of the step engine.

A single chain is sequential and fully determined by its seed; replicas are
expected to run with disjoint seeds.  Energy errors Delta H are recorded for
every proposal, accepted or not, so the harmonic error bound can be checked
independently of the acceptance rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalDivergenceError, SingularConstraintJacobianError
from .integrators import (ConstraintSolve, ForceCounter, IntegratorSpec, Stepper,
                          _require_on_manifold)
from .system import PhaseState, System, degrees_of_freedom

Observable = Callable[[System, PhaseState], float]


@dataclass(frozen=True)
class HmcConfig:
    """Knobs of a hybrid Monte Carlo run."""

    temperature: float
    n_md_steps: int
    dt: float
    integrator: IntegratorSpec
    n_proposals: int
    seed: int
    momentum_flip: bool = False
    k_boltzmann: float = 1.0
    solve: ConstraintSolve = field(default_factory=ConstraintSolve)
    frame_stride: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.n_md_steps < 1:
            raise ValueError("n_md_steps must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_proposals < 1:
            raise ValueError("n_proposals must be at least 1")
        if self.k_boltzmann <= 0:
            raise ValueError("k_boltzmann must be positive")
        if self.frame_stride < 0:
            raise ValueError("frame_stride must be nonnegative")


@dataclass(frozen=True)
class TemperatureRescale:
    """Deterministic isokinetic velocity rescaling for MD runs."""

    target_temperature: float
    interval: int

    def __post_init__(self):
        if self.target_temperature <= 0:
            raise ValueError("target_temperature must be positive")
        if self.interval < 1:
            raise ValueError("interval must be at least 1")


@dataclass(frozen=True)
class TrajectoryFrame:
    step: int
    time: float
    q: np.ndarray
    p: np.ndarray
    potential: float
    kinetic: float


@dataclass
class RunReport:
    """Everything measured during a run."""

    acceptance_rate: float | None
    delta_h_series: np.ndarray
    observable_series: dict[str, np.ndarray]
    force_eval_count: int
    frames: list[TrajectoryFrame] = field(default_factory=list)
    n_accepted: int | None = None
    n_proposals: int | None = None


def resample_momenta(system: System, q: np.ndarray, temperature: float,
                     rng: np.random.Generator, k_boltzmann: float = 1.0) -> np.ndarray:
    """Draw p_i ~ Normal(0, m_i k_B T) and, if constrained, project onto the
    velocity constraint manifold g'(q) M^-1 p = 0."""
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    mvec = system.mass_vector
    p = rng.normal(loc=0.0, scale=np.sqrt(mvec * k_boltzmann * temperature))
    if not system.constraints:
        return p
    dim = system.dimension
    jac = np.zeros((len(system.constraints), mvec.size))
    q = np.asarray(q, dtype=float)
    for row, c in enumerate(system.constraints):
        d = q[dim * c.i:dim * c.i + dim] - q[dim * c.j:dim * c.j + dim]
        u = d / np.linalg.norm(d)
        jac[row, dim * c.i:dim * c.i + dim] = u
        jac[row, dim * c.j:dim * c.j + dim] = -u
    jmj = jac @ (jac / mvec).T
    try:
        lam = np.linalg.solve(jmj, -jac @ (p / mvec))
    except np.linalg.LinAlgError as exc:
        raise SingularConstraintJacobianError(
            "constraint Jacobian is singular at these positions") from exc
    return p + jac.T @ lam


def metropolis_accept(delta_h: float, beta: float, rng: np.random.Generator) -> bool:
    """Accept with probability min(1, exp(-beta * delta_h))."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if delta_h <= 0:
        return True
    return rng.random() < np.exp(-beta * delta_h)


def _kinetic(p: np.ndarray, mvec: np.ndarray) -> float:
    return float(np.sum(p * p / (2.0 * mvec)))


def _frame(step, time, q, p, potential, kinetic):
    return TrajectoryFrame(step=step, time=time, q=q.copy(), p=p.copy(),
                           potential=potential, kinetic=kinetic)


def run_hmc(system: System, initial: PhaseState, cfg: HmcConfig,
            extra_observables: dict[str, Observable] | None = None) -> RunReport:
    """Hybrid Monte Carlo: resample momenta, integrate L steps, Metropolis test.

    On rejection the saved positions are restored and, with momentum_flip, the
    pre-proposal momenta are negated (a no-op statistically under full
    resampling, kept for config compatibility).  Costs 1 + n_proposals*(2L)
    force evaluations for a two-stage integrator, 1 + n_proposals*L for Verlet.
    """
    beta = 1.0 / (cfg.k_boltzmann * cfg.temperature)
    mvec = system.mass_vector
    rng = np.random.default_rng(cfg.seed)
    counter = ForceCounter(system)
    _require_on_manifold(system, initial.q, initial.p, cfg.solve, "run_hmc")
    stepper = Stepper(initial, cfg.integrator, system, cfg.solve, counter)
    n_dof = degrees_of_freedom(system)

    q = initial.q.copy()
    p = initial.p.copy()
    names = ["step", "time", "H", "K", "V", "T_inst", "delta_H", "accepted"]
    extra = dict(extra_observables or {})
    series: dict[str, list] = {name: [] for name in [*names, *extra]}
    frames: list[TrajectoryFrame] = []
    lead = stepper.cached_eval
    if cfg.frame_stride:
        frames.append(_frame(0, 0.0, q, p, lead.potential, _kinetic(p, mvec)))

    n_accepted = 0
    delta_h = np.empty(cfg.n_proposals)
    for k in range(cfg.n_proposals):
        p = resample_momenta(system, q, cfg.temperature, rng, cfg.k_boltzmann)
        lead = stepper.cached_eval
        h0 = _kinetic(p, mvec) + lead.potential
        if not np.isfinite(h0):
            raise NumericalDivergenceError(f"non-finite energy at proposal {k}", step=k)
        q_prop, p_prop = q.copy(), p
        end = lead
        for _ in range(cfg.n_md_steps):
            q_prop, p_prop, end = stepper.step(q_prop, p_prop, cfg.dt)
        h1 = _kinetic(p_prop, mvec) + end.potential
        if not np.isfinite(h1):
            raise NumericalDivergenceError(f"non-finite energy at proposal {k}", step=k)
        delta_h[k] = h1 - h0
        if metropolis_accept(delta_h[k], beta, rng):
            n_accepted += 1
            q, p = q_prop, p_prop
            accepted = 1
        else:
            # positions stay; invalidate the trajectory's trailing force cache
            stepper._lead = lead
            if cfg.momentum_flip:
                p = -p
            accepted = 0
        cur = stepper.cached_eval
        kin = _kinetic(p, mvec)
        h_cur = kin + cur.potential
        series["step"].append(k + 1)
        series["time"].append((k + 1) * cfg.n_md_steps * cfg.dt)
        series["H"].append(h_cur)
        series["K"].append(kin)
        series["V"].append(cur.potential)
        series["T_inst"].append(2.0 * kin / (cfg.k_boltzmann * n_dof))
        series["delta_H"].append(delta_h[k])
        series["accepted"].append(accepted)
        if extra:
            state = PhaseState(q, p)
            for name, fn in extra.items():
                series[name].append(float(fn(system, state)))
        if cfg.frame_stride and (k + 1) % cfg.frame_stride == 0:
            frames.append(_frame(k + 1, (k + 1) * cfg.n_md_steps * cfg.dt,
                                 q, p, cur.potential, kin))

    return RunReport(
        acceptance_rate=n_accepted / cfg.n_proposals,
        delta_h_series=delta_h,
        observable_series={name: np.asarray(vals) for name, vals in series.items()},
        force_eval_count=counter.count,
        frames=frames,
        n_accepted=n_accepted,
        n_proposals=cfg.n_proposals,
    )


def run_md(system: System, initial: PhaseState, spec: IntegratorSpec, dt: float,
           n_steps: int, rescale: TemperatureRescale | None = None,
           solve: ConstraintSolve | None = None, k_boltzmann: float = 1.0,
           frame_stride: int = 0,
           extra_observables: dict[str, Observable] | None = None) -> RunReport:
    """NVE trajectory (optionally with periodic isokinetic velocity rescaling),
    recording energies and observables at every step.

    Aborts with the offending step index as soon as the energy turns
    non-finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    solve = solve if solve is not None else ConstraintSolve()
    mvec = system.mass_vector
    counter = ForceCounter(system)
    _require_on_manifold(system, initial.q, initial.p, solve, "run_md")
    stepper = Stepper(initial, spec, system, solve, counter)
    n_dof = degrees_of_freedom(system)

    q = initial.q.copy()
    p = initial.p.copy()
    names = ["step", "time", "H", "K", "V", "T_inst", "delta_H"]
    extra = dict(extra_observables or {})
    series: dict[str, list] = {name: [] for name in [*names, *extra]}
    frames: list[TrajectoryFrame] = []
    kin0 = _kinetic(p, mvec)
    h0 = kin0 + stepper.cached_eval.potential
    if not np.isfinite(h0):
        raise NumericalDivergenceError("non-finite energy in the initial state", step=0)
    if frame_stride:
        frames.append(_frame(0, 0.0, q, p, stepper.cached_eval.potential, kin0))

    delta_h = np.empty(n_steps)
    for i in range(1, n_steps + 1):
        q, p, end = stepper.step(q, p, dt)
        kin = _kinetic(p, mvec)
        h_cur = kin + end.potential
        if not np.isfinite(h_cur):
            raise NumericalDivergenceError(f"energy diverged at step {i}", step=i)
        if rescale is not None and i % rescale.interval == 0:
            t_inst = 2.0 * kin / (k_boltzmann * n_dof)
            if t_inst == 0.0:
                raise NumericalDivergenceError(
                    f"cannot rescale a zero-temperature state at step {i}", step=i)
            p = p * np.sqrt(rescale.target_temperature / t_inst)
            kin = _kinetic(p, mvec)
            h_cur = kin + end.potential
        delta_h[i - 1] = h_cur - h0
        series["step"].append(i)
        series["time"].append(i * dt)
        series["H"].append(h_cur)
        series["K"].append(kin)
        series["V"].append(end.potential)
        series["T_inst"].append(2.0 * kin / (k_boltzmann * n_dof))
        series["delta_H"].append(h_cur - h0)
        if extra:
            state = PhaseState(q, p)
            for name, fn in extra.items():
                series[name].append(float(fn(system, state)))
        if frame_stride and i % frame_stride == 0:
            frames.append(_frame(i, i * dt, q, p, end.potential, kin))

    return RunReport(
        acceptance_rate=None,
        delta_h_series=delta_h,
        observable_series={name: np.asarray(vals) for name, vals in series.items()},
        force_eval_count=counter.count,
        frames=frames,
    )
