"""Splitting integrators: velocity Verlet and the one-parameter two-stage family.

One two-stage step is the palindromic composition

    kick(b*dt) . drift(dt/2) . kick((1-2b)*dt) . drift(dt/2) . kick(b*dt)

implemented as two Verlet-shaped half steps so the same code path serves the
constrained case, where each half step carries a position-level and a
velocity-level Lagrange multiplier solve (RATTLE-style).  The trailing force
of a step is cached and reused as the leading force of the next step, so a
trajectory of n two-stage steps costs exactly 2n+1 force evaluations (n+1 for
Verlet).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import ConstraintConvergenceError, ConstraintViolationError
from .forces import ForceEval, total_eval
from .system import PhaseState, System

VERLET = "verlet"
TWO_STAGE = "two_stage"

#: fixed-parameter members of the two-stage family, by config name
PRESET_B = {
    "two-s": 0.2113,           # minimax-optimal over dimensionless steps in (0, 2)
    "two-s-minE": 0.1932,      # smallest error constant, shortest stability interval
    "verlet-equivalent": 0.25, # one step == two Verlet half steps
}


@dataclass(frozen=True)
class IntegratorSpec:
    """Selects a family member: plain Verlet or a two-stage scheme with parameter b."""

    kind: str
    b: float | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.kind not in (VERLET, TWO_STAGE):
            raise ValueError(f"unknown integrator kind {self.kind!r}")
        if self.kind == TWO_STAGE:
            if self.b is None or not (0.0 < self.b < 0.5):
                raise ValueError(f"two-stage parameter b must lie in (0, 0.5), got {self.b}")
        elif self.b is not None:
            raise ValueError("verlet takes no b parameter")

    @classmethod
    def verlet(cls) -> "IntegratorSpec":
        return cls(VERLET)

    @classmethod
    def two_stage(cls, b: float, preset: str | None = None) -> "IntegratorSpec":
        return cls(TWO_STAGE, float(b), preset)

    @classmethod
    def from_name(cls, name: str, b: float | None = None) -> "IntegratorSpec":
        """Resolve a config-file integrator name.

        ``two-s`` honours an explicit ``b``; ``two-s-AIA`` cannot be resolved
        here because it needs a system and a step size (see adaptive.select_b).
        """
        if name == "md-vv":
            return cls.verlet()
        if name == "two-s":
            return cls.two_stage(PRESET_B["two-s"] if b is None else b, preset="two-s")
        if name in PRESET_B:
            if b is not None:
                raise ValueError(f"{name} fixes b; do not pass one")
            return cls.two_stage(PRESET_B[name], preset=name)
        if name == "two-s-AIA":
            raise ValueError("two-s-AIA must be resolved with select_b before building a spec")
        raise ValueError(f"unknown integrator name {name!r}")


@dataclass(frozen=True)
class ConstraintSolve:
    """Iterative constraint solver parameters.

    ``tolerance`` is relative to the constraint length for the position stage
    and absolute for the velocity stage.
    """

    tolerance: float = 1e-10
    max_iterations: int = 500

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


# ---------------------------------------------------------------------------
# elementary maps

def kick(state: PhaseState, tau: float, forces: np.ndarray) -> PhaseState:
    """p -> p + tau * forces; positions unchanged."""
    forces = np.asarray(forces, dtype=float)
    if forces.shape != state.p.shape:
        raise ValueError(f"forces shape {forces.shape} != momenta shape {state.p.shape}")
    return PhaseState(state.q, state.p + tau * forces)


def drift(state: PhaseState, tau: float, system: System) -> PhaseState:
    """q -> q + tau * M^-1 p; momenta unchanged."""
    m = system.mass_vector
    if state.q.size != m.size:
        raise ValueError(f"state has {state.q.size} coordinates, system expects {m.size}")
    return PhaseState(state.q + tau * state.p / m, state.p)


# ---------------------------------------------------------------------------
# raw-array engine (avoids PhaseState construction in inner loops)

class ForceCounter:
    """Wraps a force evaluator and counts calls."""

    def __init__(self, system: System, evaluate: Callable[[System, np.ndarray], ForceEval] = total_eval):
        self.system = system
        self._evaluate = evaluate
        self.count = 0

    def __call__(self, q: np.ndarray) -> ForceEval:
        self.count += 1
        return self._evaluate(self.system, q)


def _unconstrained_kdk(q, p, tau1, tau_d, tau2, mvec, evaluator, lead_forces):
    p = p + tau1 * lead_forces
    q = q + tau_d * (p / mvec)
    end = evaluator(q)
    p = p + tau2 * end.forces
    return q, p, end


def _constrained_kdk(q, p, tau1, tau_d, tau2, system, evaluator, lead_forces,
                     solve: ConstraintSolve):
    """Half step with multipliers: leading kick adjusted so the post-drift
    positions satisfy g(q)=0, trailing kick adjusted so g'(q) M^-1 p = 0."""
    dim = system.dimension
    masses = system.masses
    mvec = system.mass_vector
    tol = solve.tolerance

    p1 = p + tau1 * lead_forces
    qn = q + tau_d * (p1 / mvec)
    # constraint-force directions are the bond unit vectors at the old positions
    u_old = []
    for c in system.constraints:
        d = q[dim * c.i:dim * c.i + dim] - q[dim * c.j:dim * c.j + dim]
        u_old.append(d / np.linalg.norm(d))

    worst = np.inf
    for _ in range(solve.max_iterations):
        worst = 0.0
        for u, c in zip(u_old, system.constraints):
            si = slice(dim * c.i, dim * c.i + dim)
            sj = slice(dim * c.j, dim * c.j + dim)
            dn = qn[si] - qn[sj]
            rn = np.linalg.norm(dn)
            gk = rn - c.length
            worst = max(worst, abs(gk) / c.length)
            if abs(gk) <= tol * c.length:
                continue
            denom = tau_d * (1.0 / masses[c.i] + 1.0 / masses[c.j]) * float((dn / rn) @ u)
            if abs(denom) < 1e-300:
                raise ConstraintConvergenceError(
                    f"position stage stalled on constraint ({c.i},{c.j})", gk)
            impulse = -(gk / denom) * u
            p1[si] += impulse
            p1[sj] -= impulse
            qn[si] += tau_d * impulse / masses[c.i]
            qn[sj] -= tau_d * impulse / masses[c.j]
        if worst <= tol:
            break
    else:
        raise ConstraintConvergenceError(
            f"position constraints not converged in {solve.max_iterations} sweeps", worst)

    end = evaluator(qn)
    p2 = p1 + tau2 * end.forces
    for _ in range(solve.max_iterations):
        worst = 0.0
        for c in system.constraints:
            si = slice(dim * c.i, dim * c.i + dim)
            sj = slice(dim * c.j, dim * c.j + dim)
            dn = qn[si] - qn[sj]
            un = dn / np.linalg.norm(dn)
            rk = float(un @ (p2[si] / masses[c.i] - p2[sj] / masses[c.j]))
            worst = max(worst, abs(rk))
            if abs(rk) <= tol:
                continue
            impulse = -(rk / (1.0 / masses[c.i] + 1.0 / masses[c.j])) * un
            p2[si] += impulse
            p2[sj] -= impulse
        if worst <= tol:
            break
    else:
        raise ConstraintConvergenceError(
            f"velocity constraints not converged in {solve.max_iterations} sweeps", worst)
    return qn, p2, end


def constraint_residuals(system: System, q: np.ndarray, p: np.ndarray | None = None):
    """Position residuals |q_i - q_j| - length and, if p given, g'(q) M^-1 p."""
    dim = system.dimension
    g = np.empty(len(system.constraints))
    gv = np.empty(len(system.constraints)) if p is not None else None
    for k, c in enumerate(system.constraints):
        d = q[dim * c.i:dim * c.i + dim] - q[dim * c.j:dim * c.j + dim]
        r = np.linalg.norm(d)
        g[k] = r - c.length
        if p is not None:
            u = d / r
            gv[k] = u @ (p[dim * c.i:dim * c.i + dim] / system.masses[c.i]
                         - p[dim * c.j:dim * c.j + dim] / system.masses[c.j])
    return (g, gv) if p is not None else g


def _require_on_manifold(system, q, p, solve, where):
    if not system.constraints:
        return
    g, gv = constraint_residuals(system, q, p)
    lengths = np.array([c.length for c in system.constraints])
    slack = 100.0 * solve.tolerance
    if np.any(np.abs(g) > slack * lengths):
        raise ConstraintViolationError(
            f"{where}: position constraint residual {np.max(np.abs(g / lengths)):.3e} "
            f"exceeds {slack:.1e} (relative)")
    if np.any(np.abs(gv) > slack):
        raise ConstraintViolationError(
            f"{where}: velocity constraint residual {np.max(np.abs(gv)):.3e} exceeds {slack:.1e}")


class Stepper:
    """Stateful step engine carrying the force cache across the step seam."""

    def __init__(self, state_or_q, spec: IntegratorSpec, system: System,
                 solve: ConstraintSolve | None = None,
                 evaluator: ForceCounter | None = None):
        q = state_or_q.q if isinstance(state_or_q, PhaseState) else np.asarray(state_or_q, float)
        self.system = system
        self.spec = spec
        self.solve = solve if solve is not None else ConstraintSolve()
        self.evaluator = evaluator if evaluator is not None else ForceCounter(system)
        self.constrained = bool(system.constraints)
        self._lead = self.evaluator(q)

    @property
    def cached_eval(self) -> ForceEval:
        """Force evaluation at the current positions (end of the last step)."""
        return self._lead

    def reset_positions(self, q: np.ndarray):
        """Re-prime the force cache after an external change of positions."""
        self._lead = self.evaluator(q)

    def step(self, q: np.ndarray, p: np.ndarray, dt: float):
        sys_, ev = self.system, self.evaluator
        mvec = sys_.mass_vector
        if self.spec.kind == VERLET:
            if self.constrained:
                q, p, end = _constrained_kdk(q, p, 0.5 * dt, dt, 0.5 * dt,
                                             sys_, ev, self._lead.forces, self.solve)
            else:
                q, p, end = _unconstrained_kdk(q, p, 0.5 * dt, dt, 0.5 * dt,
                                               mvec, ev, self._lead.forces)
        else:
            b = self.spec.b
            taus = ((b * dt, 0.5 * dt, (0.5 - b) * dt),
                    (((0.5 - b) * dt), 0.5 * dt, b * dt))
            end = self._lead
            for t1, td, t2 in taus:
                if self.constrained:
                    q, p, end = _constrained_kdk(q, p, t1, td, t2, sys_, ev,
                                                 end.forces, self.solve)
                else:
                    q, p, end = _unconstrained_kdk(q, p, t1, td, t2, mvec, ev, end.forces)
        self._lead = end
        return q, p, end


# ---------------------------------------------------------------------------
# public single-step operations (fresh leading force evaluation)

def two_stage_step(state: PhaseState, dt: float, b: float, system: System) -> PhaseState:
    """One step of the two-stage scheme with parameter b.

    b is assumed valid (IntegratorSpec rejects degenerate values at
    construction).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = Stepper(state, IntegratorSpec.two_stage(b), system)
    q, p, _ = stepper.step(state.q.copy(), state.p.copy(), dt)
    return PhaseState(q, p)


def verlet_step(state: PhaseState, dt: float, system: System) -> PhaseState:
    """One velocity Verlet step: kick(dt/2), drift(dt), kick(dt/2)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = Stepper(state, IntegratorSpec.verlet(), system)
    q, p, _ = stepper.step(state.q.copy(), state.p.copy(), dt)
    return PhaseState(q, p)


def constrained_half_step(state: PhaseState, half: Literal["first", "second"],
                          dt: float, b: float, system: System,
                          solve: ConstraintSolve | None = None) -> PhaseState:
    """One constrained half step (dt/2 of motion) of the two-stage scheme.

    The first half kicks by b*dt then (1/2-b)*dt, the second half in the
    mirrored order.  The leading kick carries the position-level multiplier,
    the trailing kick the velocity-level one.  The incoming state must satisfy
    both constraint levels to within 100x the solver tolerance.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if half not in ("first", "second"):
        raise ValueError(f"half must be 'first' or 'second', got {half!r}")
    solve = solve if solve is not None else ConstraintSolve()
    _require_on_manifold(system, state.q, state.p, solve, "constrained_half_step")
    lead = total_eval(system, state.q)
    t_lead = b * dt if half == "first" else (0.5 - b) * dt
    t_trail = (0.5 - b) * dt if half == "first" else b * dt
    q, p, _ = _constrained_kdk(state.q.copy(), state.p.copy(), t_lead, 0.5 * dt,
                               t_trail, system, lambda qq: total_eval(system, qq),
                               lead.forces, solve)
    return PhaseState(q, p)


def two_stage_constrained_step(state: PhaseState, dt: float, b: float, system: System,
                               solve: ConstraintSolve | None = None) -> PhaseState:
    """Full constrained two-stage step: the two half steps composed."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    solve = solve if solve is not None else ConstraintSolve()
    _require_on_manifold(system, state.q, state.p, solve, "two_stage_constrained_step")
    stepper = Stepper(state, IntegratorSpec.two_stage(b), system, solve)
    q, p, _ = stepper.step(state.q.copy(), state.p.copy(), dt)
    return PhaseState(q, p)


def rattle_step(state: PhaseState, dt: float, system: System,
                solve: ConstraintSolve | None = None) -> PhaseState:
    """Constrained velocity Verlet (RATTLE) step of length dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    solve = solve if solve is not None else ConstraintSolve()
    _require_on_manifold(system, state.q, state.p, solve, "rattle_step")
    stepper = Stepper(state, IntegratorSpec.verlet(), system, solve)
    q, p, _ = stepper.step(state.q.copy(), state.p.copy(), dt)
    return PhaseState(q, p)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """States recorded along a run plus the exact force-evaluation count."""

    states: list[PhaseState] = field(default_factory=list)
    final_state: PhaseState | None = None
    force_evaluations: int = 0


def integrate(state: PhaseState, spec: IntegratorSpec, dt: float, n_steps: int,
              system: System, solve: ConstraintSolve | None = None,
              record_stride: int = 1) -> Trajectory:
    """Advance ``n_steps`` steps, recording every ``record_stride``-th state.

    ``record_stride=0`` records nothing but still fills ``final_state``.
    Constrained systems automatically use the multiplier-carrying steps.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    solve = solve if solve is not None else ConstraintSolve()
    if system.constraints:
        _require_on_manifold(system, state.q, state.p, solve, "integrate")
    counter = ForceCounter(system)
    stepper = Stepper(state, spec, system, solve, counter)
    q, p = state.q.copy(), state.p.copy()
    traj = Trajectory()
    for step_index in range(1, n_steps + 1):
        q, p, _ = stepper.step(q, p, dt)
        if record_stride and step_index % record_stride == 0:
            traj.states.append(PhaseState(q, p))
    traj.final_state = PhaseState(q, p)
    traj.force_evaluations = counter.count
    return traj
