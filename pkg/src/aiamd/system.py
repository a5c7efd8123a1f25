"""Physical system topology and phase-space state.

Units are user-consistent reduced units: the Boltzmann constant defaults to 1
and every quantity is expressed in whatever consistent unit system the caller
adopts.  ``System`` and ``PhaseState`` are immutable value objects; operations
that advance the dynamics return new states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bond:
    """Harmonic bond 0.5*k*(|q_i - q_j| - r0)^2 between particles i and j."""

    i: int
    j: int
    k_spring: float
    r0: float


@dataclass(frozen=True)
class Constraint:
    """Holonomic distance constraint |q_i - q_j| = length."""

    i: int
    j: int
    length: float


@dataclass(frozen=True)
class LennardJones:
    """Lennard-Jones parameters shared by all non-excluded pairs."""

    epsilon: float
    sigma: float
    cutoff: float
    shift_to_zero_at_cutoff: bool = True


@dataclass(frozen=True)
class System:
    """Static topology: masses, bonded/nonbonded interactions, constraints.

    ``exclusions`` holds particle pairs skipped by the nonbonded term.  Bonded
    and constrained pairs are always excluded; extra pairs may be passed in.
    """

    masses: np.ndarray
    dimension: int
    bonds: tuple[Bond, ...] = ()
    nonbonded: LennardJones | None = None
    constraints: tuple[Constraint, ...] = ()
    exclusions: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        masses = _frozen_array(self.masses)
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-d sequence")
        if not np.all(masses > 0):
            raise ValueError("all masses must be positive")
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        object.__setattr__(self, "masses", masses)

        n = masses.size
        bonds = tuple(self.bonds)
        for b in bonds:
            self._check_pair(b.i, b.j, n, "bond")
            if b.k_spring <= 0:
                raise ValueError(f"bond ({b.i},{b.j}): k_spring must be positive")
            if b.r0 < 0:
                raise ValueError(f"bond ({b.i},{b.j}): r0 must be nonnegative")
        constraints = tuple(self.constraints)
        for c in constraints:
            self._check_pair(c.i, c.j, n, "constraint")
            if c.length <= 0:
                raise ValueError(f"constraint ({c.i},{c.j}): length must be positive")

        bond_pairs = {_pair_key(b.i, b.j) for b in bonds}
        if len(bond_pairs) != len(bonds):
            raise ValueError("duplicate bond pair")
        constraint_pairs = {_pair_key(c.i, c.j) for c in constraints}
        if len(constraint_pairs) != len(constraints):
            raise ValueError("duplicate constraint pair")
        overlap = bond_pairs & constraint_pairs
        if overlap:
            raise ValueError(f"pairs {sorted(overlap)} appear in both bonds and constraints")

        if self.nonbonded is not None:
            lj = self.nonbonded
            if lj.epsilon <= 0 or lj.sigma <= 0 or lj.cutoff <= 0:
                raise ValueError("Lennard-Jones parameters must be positive")

        extra = {_pair_key(i, j) for (i, j) in self.exclusions}
        for (i, j) in extra:
            self._check_pair(i, j, n, "exclusion")
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "exclusions", frozenset(bond_pairs | constraint_pairs | extra))
        # per-coordinate mass vector, precomputed once for kick/drift loops
        object.__setattr__(self, "_mass_vector", _frozen_array(np.repeat(masses, self.dimension)))

    @staticmethod
    def _check_pair(i, j, n, what):
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{what} ({i},{j}) out of range for {n} particles")
        if i == j:
            raise ValueError(f"{what} ({i},{j}) joins a particle to itself")

    @property
    def n_particles(self) -> int:
        return self.masses.size

    @property
    def mass_vector(self) -> np.ndarray:
        """Masses repeated per coordinate, matching the flat q/p layout."""
        return self._mass_vector


def _pair_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class PhaseState:
    """Flat positions and momenta; length = n_particles * dimension."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _frozen_array(self.q)
        p = _frozen_array(self.p)
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError(f"q and p must be flat arrays of equal length, got {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)


def build_harmonic_chain(n: int, mass: float, k_spring: float, r0: float,
                         dimension: int = 3) -> System:
    """Linear chain of ``n`` identical particles joined by n-1 identical bonds."""
    if n < 2:
        raise ValueError(f"a chain needs at least 2 particles, got {n}")
    if mass <= 0 or k_spring <= 0 or r0 <= 0:
        raise ValueError("mass, k_spring and r0 must be positive")
    bonds = tuple(Bond(i, i + 1, k_spring, r0) for i in range(n - 1))
    return System(masses=np.full(n, mass), dimension=dimension, bonds=bonds)


def build_constrained_dumbbell(mass: float, d: float, dimension: int = 3) -> System:
    """Two particles joined by a single distance constraint of length ``d``."""
    if mass <= 0 or d <= 0:
        raise ValueError("mass and constraint length must be positive")
    return System(masses=np.array([mass, mass]), dimension=dimension,
                  constraints=(Constraint(0, 1, d),))


def build_lj_cluster(n: int, epsilon: float, sigma: float, cutoff: float,
                     dimension: int = 3) -> System:
    """``n`` identical unit-mass particles with shifted Lennard-Jones interactions."""
    if n < 2:
        raise ValueError(f"a cluster needs at least 2 particles, got {n}")
    if epsilon <= 0 or sigma <= 0 or cutoff <= 0:
        raise ValueError("epsilon, sigma and cutoff must be positive")
    if cutoff <= sigma:
        raise ValueError(f"cutoff {cutoff} must exceed sigma {sigma}")
    lj = LennardJones(epsilon, sigma, cutoff, shift_to_zero_at_cutoff=True)
    return System(masses=np.ones(n), dimension=dimension, nonbonded=lj)


def kinetic_energy(system: System, state: PhaseState) -> float:
    """Sum of p_i^2 / (2 m_i)."""
    m = system.mass_vector
    if state.p.size != m.size:
        raise ValueError(f"state has {state.p.size} coordinates, system expects {m.size}")
    return float(np.sum(state.p * state.p / (2.0 * m)))


def degrees_of_freedom(system: System) -> int:
    """n_particles * dimension minus one per constraint; center of mass counted."""
    return system.n_particles * system.dimension - len(system.constraints)
