"""Potential energy and forces: harmonic bonds plus shifted Lennard-Jones.

All evaluators are pure functions of (system, q) returning the potential and
its exact negative gradient.  Pair loops are O(n^2); no neighbour lists, no
periodic boundaries.  Scatter-adds use ``np.add.at`` so summation order is
fixed regardless of threading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoincidentParticlesError
from .system import PhaseState, System, kinetic_energy


@dataclass(frozen=True)
class ForceEval:
    """Potential V(q) and forces -grad V(q) in the flat q layout."""

    potential: float
    forces: np.ndarray


def _as_points(system: System, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    expected = system.n_particles * system.dimension
    if q.shape != (expected,):
        raise ValueError(f"positions must have shape ({expected},), got {q.shape}")
    return q.reshape(system.n_particles, system.dimension)


def harmonic_bond_eval(system: System, q) -> ForceEval:
    """V = sum over bonds of 0.5 * k * (|q_i - q_j| - r0)^2."""
    pts = _as_points(system, q)
    forces = np.zeros_like(pts)
    if not system.bonds:
        return ForceEval(0.0, forces.ravel())
    i_idx = np.array([b.i for b in system.bonds])
    j_idx = np.array([b.j for b in system.bonds])
    k = np.array([b.k_spring for b in system.bonds])
    r0 = np.array([b.r0 for b in system.bonds])
    d = pts[i_idx] - pts[j_idx]
    r = np.linalg.norm(d, axis=1)
    if np.any(r == 0):
        bad = int(np.argmax(r == 0))
        raise CoincidentParticlesError(
            f"bonded particles {i_idx[bad]} and {j_idx[bad]} coincide")
    v = float(np.sum(0.5 * k * (r - r0) ** 2))
    pair_force = (-k * (r - r0) / r)[:, None] * d
    np.add.at(forces, i_idx, pair_force)
    np.add.at(forces, j_idx, -pair_force)
    return ForceEval(v, forces.ravel())


def candidate_pairs(system: System) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j) of all i<j pairs not excluded from the nonbonded term."""
    i_idx, j_idx = np.triu_indices(system.n_particles, k=1)
    if system.exclusions:
        keep = np.array([(int(a), int(b)) not in system.exclusions
                         for a, b in zip(i_idx, j_idx)])
        i_idx, j_idx = i_idx[keep], j_idx[keep]
    return i_idx, j_idx


def lennard_jones_eval(system: System, q) -> ForceEval:
    """Shifted LJ: pair term 4*eps*((s/r)^12 - (s/r)^6) - shift inside the cutoff.

    The shift makes the pair potential vanish at the cutoff; it is a constant,
    so forces are unaffected by it.
    """
    pts = _as_points(system, q)
    forces = np.zeros_like(pts)
    lj = system.nonbonded
    if lj is None:
        return ForceEval(0.0, forces.ravel())
    i_idx, j_idx = candidate_pairs(system)
    if i_idx.size == 0:
        return ForceEval(0.0, forces.ravel())
    d = pts[i_idx] - pts[j_idx]
    r2 = np.sum(d * d, axis=1)
    if np.any(r2 == 0):
        bad = int(np.argmax(r2 == 0))
        raise CoincidentParticlesError(
            f"particles {i_idx[bad]} and {j_idx[bad]} coincide")
    within = r2 < lj.cutoff ** 2
    if not np.any(within):
        return ForceEval(0.0, forces.ravel())
    i_idx, j_idx, d, r2 = i_idx[within], j_idx[within], d[within], r2[within]
    sr2 = lj.sigma ** 2 / r2
    sr6 = sr2 ** 3
    sr12 = sr6 ** 2
    pair_v = 4.0 * lj.epsilon * (sr12 - sr6)
    if lj.shift_to_zero_at_cutoff:
        sc6 = (lj.sigma / lj.cutoff) ** 6
        pair_v = pair_v - 4.0 * lj.epsilon * (sc6 ** 2 - sc6)
    v = float(np.sum(pair_v))
    fmag_over_r = 24.0 * lj.epsilon * (2.0 * sr12 - sr6) / r2
    pair_force = fmag_over_r[:, None] * d
    np.add.at(forces, i_idx, pair_force)
    np.add.at(forces, j_idx, -pair_force)
    return ForceEval(v, forces.ravel())


def total_eval(system: System, q) -> ForceEval:
    """Sum of all interaction terms present in the system."""
    bonded = harmonic_bond_eval(system, q)
    if system.nonbonded is None:
        return bonded
    nb = lennard_jones_eval(system, q)
    return ForceEval(bonded.potential + nb.potential, bonded.forces + nb.forces)


def total_energy(system: System, state: PhaseState) -> float:
    """H = kinetic + potential at the given state."""
    return kinetic_energy(system, state) + total_eval(system, state.q).potential
