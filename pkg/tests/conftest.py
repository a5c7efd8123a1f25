"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from aiamd import Bond, Constraint, PhaseState, System


# ---------------------------------------------------------------------------
# the unit harmonic oscillator realized as a bonded pair
#
# Two particles of mass 2 in 1d joined by a k=1, r0=0 bond: the relative
# coordinate r = q0 - q1 with conjugate momentum p_r = (p0 - p1)/2 obeys
# dr/dt = p_r, dp_r/dt = -r exactly, and the center of mass is free.

def pair_oscillator_system() -> System:
    return System(masses=np.array([2.0, 2.0]), dimension=1,
                  bonds=(Bond(0, 1, 1.0, 0.0),))


def oscillator_state(r: float, pr: float) -> PhaseState:
    return PhaseState(np.array([r / 2.0, -r / 2.0]), np.array([pr, -pr]))


def oscillator_coords(state: PhaseState) -> tuple[float, float]:
    r = float(state.q[0] - state.q[1])
    pr = float((state.p[0] - state.p[1]) / 2.0)
    return r, pr


def ensemble_pair_system(n_pairs: int) -> System:
    """n_pairs independent unit oscillators packed into one 1d system."""
    bonds = tuple(Bond(2 * i, 2 * i + 1, 1.0, 0.0) for i in range(n_pairs))
    return System(masses=np.full(2 * n_pairs, 2.0), dimension=1, bonds=bonds)


def ensemble_state(r: np.ndarray, pr: np.ndarray) -> PhaseState:
    q = np.empty(2 * r.size)
    p = np.empty(2 * r.size)
    q[0::2], q[1::2] = r / 2.0, -r / 2.0
    p[0::2], p[1::2] = pr, -pr
    return PhaseState(q, p)


def ensemble_energies(state: PhaseState) -> np.ndarray:
    """Per-oscillator energies (r^2 + p_r^2)/2 of the packed ensemble."""
    r = state.q[0::2] - state.q[1::2]
    pr = (state.p[0::2] - state.p[1::2]) / 2.0
    return 0.5 * (r * r + pr * pr)


# ---------------------------------------------------------------------------
# 2x2 matrix oracle for the harmonic oscillator

def kick_matrix(tau: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [-tau, 1.0]])


def drift_matrix(tau: float) -> np.ndarray:
    return np.array([[1.0, tau], [0.0, 1.0]])


def two_stage_matrix(dt: float, b: float) -> np.ndarray:
    """Product of the five elementary maps, rightmost applied first."""
    return (kick_matrix(b * dt) @ drift_matrix(dt / 2.0)
            @ kick_matrix((1.0 - 2.0 * b) * dt) @ drift_matrix(dt / 2.0)
            @ kick_matrix(b * dt))


def verlet_matrix(dt: float) -> np.ndarray:
    return kick_matrix(dt / 2.0) @ drift_matrix(dt) @ kick_matrix(dt / 2.0)


def numerical_map_matrix(step_fn) -> np.ndarray:
    """2x2 matrix of a linear map on (r, p_r), read off from probe states.

    Probes (1,0) and (1,1) rather than the canonical basis: the pure-momentum
    state starts the bonded pair coincident, which the force evaluator
    rejects.  The second column follows by linearity.
    """
    first = np.array(oscillator_coords(step_fn(oscillator_state(1.0, 0.0))))
    mixed = np.array(oscillator_coords(step_fn(oscillator_state(1.0, 1.0))))
    return np.column_stack([first, mixed - first])


# ---------------------------------------------------------------------------
# independent RATTLE oracle (squared-residual Newton + exact linear velocity solve)

def rattle_oracle_step(system: System, q: np.ndarray, p: np.ndarray, dt: float,
                       force_fn) -> tuple[np.ndarray, np.ndarray]:
    """One RATTLE step of length dt, solved along a different algebraic route
    than the package: squared distance residuals for the position multipliers
    and a dense linear solve for the velocity ones."""
    dim = system.dimension
    masses = system.masses
    mvec = system.mass_vector
    f0 = force_fn(q)
    ph = p + 0.5 * dt * f0
    qf = q + dt * ph / mvec
    for _ in range(400):
        done = True
        for c in system.constraints:
            si = slice(dim * c.i, dim * c.i + dim)
            sj = slice(dim * c.j, dim * c.j + dim)
            u0 = q[si] - q[sj]
            u0 = u0 / np.linalg.norm(u0)
            dc = qf[si] - qf[sj]
            res = float(dc @ dc) - c.length ** 2
            if abs(res) > 1e-24:
                done = False
                slope = 2.0 * float(dc @ u0) * dt * (1.0 / masses[c.i] + 1.0 / masses[c.j])
                delta = -res / slope
                ph[si] += delta * u0
                ph[sj] -= delta * u0
                qf[si] += dt * delta * u0 / masses[c.i]
                qf[sj] -= dt * delta * u0 / masses[c.j]
        if done:
            break
    f1 = force_fn(qf)
    p1 = ph + 0.5 * dt * f1
    jac = np.zeros((len(system.constraints), q.size))
    for row, c in enumerate(system.constraints):
        si = slice(dim * c.i, dim * c.i + dim)
        sj = slice(dim * c.j, dim * c.j + dim)
        u = qf[si] - qf[sj]
        u = u / np.linalg.norm(u)
        jac[row, si] = u
        jac[row, sj] = -u
    a = jac @ (jac / mvec).T
    mu = np.linalg.solve(a, -jac @ (p1 / mvec))
    return qf, p1 + jac.T @ mu


def dumbbell_with_trap() -> tuple[System, PhaseState]:
    """Constrained dumbbell plus a heavy anchor bonded to both ends: the
    anchor bonds act as a nearly static external harmonic trap."""
    system = System(
        masses=np.array([1.0, 1.0, 1.0e4]),
        dimension=3,
        bonds=(Bond(0, 2, 1.0, 1.0), Bond(1, 2, 1.0, 1.0)),
        constraints=(Constraint(0, 1, 1.0),),
    )
    q = np.array([0.8, 0.1, 0.0,
                  0.8, 0.1, 1.0,
                  0.0, 0.0, 0.5])
    rng = np.random.default_rng(2024)
    p = 0.4 * rng.normal(size=9)
    p[6:] = 0.0
    # project momenta onto the velocity constraint by hand
    u = (q[0:3] - q[3:6])
    u = u / np.linalg.norm(u)
    rel = float(u @ (p[0:3] / 1.0 - p[3:6] / 1.0))
    p[0:3] -= 0.5 * rel * u
    p[3:6] += 0.5 * rel * u
    return system, PhaseState(q, p)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
