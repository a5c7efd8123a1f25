"""Force evaluators: hand values, gradient consistency, symmetry properties."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aiamd import (Bond, CoincidentParticlesError, LennardJones, System,
                   build_harmonic_chain, build_lj_cluster, harmonic_bond_eval,
                   lennard_jones_eval, total_eval)


def mixed_system(n=8, k=3.0, r0=1.1):
    """Chain bonds plus LJ among non-bonded pairs."""
    bonds = tuple(Bond(i, i + 1, k, r0) for i in range(n - 1))
    return System(masses=np.ones(n), dimension=3, bonds=bonds,
                  nonbonded=LennardJones(0.4, 0.9, 4.0))


def spread_positions(system, rng, scale=1.0):
    """Random configuration with no near-coincident pairs."""
    n, dim = system.n_particles, system.dimension
    pts = np.arange(n)[:, None] * np.ones(dim) * 1.2
    pts += 0.3 * scale * rng.normal(size=(n, dim))
    return pts.ravel()


class TestHarmonicBonds:
    def test_stretched_pair_value_and_force(self):
        system = build_harmonic_chain(2, 1.0, 1.0, 1.0)
        q = np.array([0.0, 0, 0, 1.5, 0, 0])
        out = harmonic_bond_eval(system, q)
        assert out.potential == pytest.approx(0.125)
        f0 = out.forces[:3]
        f1 = out.forces[3:]
        assert np.linalg.norm(f0) == pytest.approx(0.5)
        assert np.linalg.norm(f1) == pytest.approx(0.5)
        # attractive: particle 0 pulled toward +x, particle 1 toward -x
        assert f0[0] > 0 and f1[0] < 0

    def test_equilibrium_is_force_free(self):
        system = build_harmonic_chain(2, 5.0, 2.0, 1.0)
        q = np.array([0.0, 0, 0, 1.0, 0, 0])
        out = harmonic_bond_eval(system, q)
        assert out.potential == 0.0
        assert np.all(out.forces == 0.0)

    def test_coincident_bonded_pair_raises(self):
        system = build_harmonic_chain(2, 1.0, 1.0, 1.0)
        with pytest.raises(CoincidentParticlesError):
            harmonic_bond_eval(system, np.zeros(6))


class TestLennardJones:
    def unshifted_pair(self, cutoff=10.0):
        return System(masses=np.ones(2), dimension=3,
                      nonbonded=LennardJones(1.0, 1.0, cutoff, shift_to_zero_at_cutoff=False))

    def pair_at(self, r):
        return np.array([0.0, 0, 0, r, 0, 0])

    def test_minimum(self):
        system = self.unshifted_pair()
        r = 2.0 ** (1.0 / 6.0)
        out = lennard_jones_eval(system, self.pair_at(r))
        assert out.potential == pytest.approx(-1.0)
        assert np.max(np.abs(out.forces)) == pytest.approx(0.0, abs=1e-12)

    def test_zero_at_sigma(self):
        system = self.unshifted_pair()
        out = lennard_jones_eval(system, self.pair_at(1.0))
        assert out.potential == pytest.approx(0.0, abs=1e-12)

    def test_beyond_cutoff_contributes_nothing(self):
        system = build_lj_cluster(2, 1.0, 1.0, 3.0)
        out = lennard_jones_eval(system, self.pair_at(3.5))
        assert out.potential == 0.0
        assert np.all(out.forces == 0.0)

    def test_shift_zeroes_potential_at_cutoff(self):
        system = build_lj_cluster(2, 1.0, 1.0, 2.5)
        just_in = lennard_jones_eval(system, self.pair_at(2.5 - 1e-9))
        assert abs(just_in.potential) < 1e-7

    def test_shift_leaves_forces_alone(self):
        shifted = build_lj_cluster(2, 1.0, 1.0, 3.0)
        plain = self.unshifted_pair(cutoff=3.0)
        q = self.pair_at(1.3)
        np.testing.assert_allclose(lennard_jones_eval(shifted, q).forces,
                                   lennard_jones_eval(plain, q).forces, rtol=1e-14)

    def test_coincident_pair_raises(self):
        with pytest.raises(CoincidentParticlesError):
            lennard_jones_eval(build_lj_cluster(2, 1.0, 1.0, 3.0), np.zeros(6))

    def test_bonded_pairs_excluded(self):
        system = System(masses=np.ones(2), dimension=3,
                        bonds=(Bond(0, 1, 1.0, 1.0),),
                        nonbonded=LennardJones(1.0, 1.0, 5.0))
        out = lennard_jones_eval(system, self.pair_at(1.1))
        assert out.potential == 0.0


class TestTotal:
    def test_empty_system(self):
        system = System(masses=np.ones(3), dimension=2)
        out = total_eval(system, np.arange(6.0))
        assert out.potential == 0.0
        assert np.all(out.forces == 0.0)

    def test_bonds_only_equals_bond_eval(self):
        system = build_harmonic_chain(4, 1.0, 2.0, 1.0)
        rng = np.random.default_rng(3)
        q = spread_positions(system, rng)
        total = total_eval(system, q)
        bonded = harmonic_bond_eval(system, q)
        assert total.potential == bonded.potential
        np.testing.assert_array_equal(total.forces, bonded.forces)

    def test_disjoint_terms_add(self):
        # bond between 0-1; LJ only couples 2-3 (others excluded by distance)
        system = System(masses=np.ones(4), dimension=3,
                        bonds=(Bond(0, 1, 2.0, 1.0),),
                        nonbonded=LennardJones(1.0, 1.0, 1.8))
        q = np.array([0.0, 0, 0,
                      1.4, 0, 0,
                      10.0, 0, 0,
                      11.1, 0, 0])
        total = total_eval(system, q)
        bonded = harmonic_bond_eval(system, q)
        nb = lennard_jones_eval(system, q)
        assert nb.potential != 0.0
        assert total.potential == pytest.approx(bonded.potential + nb.potential)
        np.testing.assert_allclose(total.forces, bonded.forces + nb.forces)


class TestForceProperties:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_forces_match_finite_differences(self, seed):
        system = mixed_system()
        rng = np.random.default_rng(seed)
        q = spread_positions(system, rng)
        out = total_eval(system, q)
        eps = 1e-5
        for idx in rng.choice(q.size, size=10, replace=False):
            plus = q.copy(); plus[idx] += eps
            minus = q.copy(); minus[idx] -= eps
            fd = -(total_eval(system, plus).potential - total_eval(system, minus).potential) / (2 * eps)
            scale = max(1.0, abs(out.forces[idx]))
            assert abs(out.forces[idx] - fd) / scale < 1e-5

    @pytest.mark.parametrize("seed", range(4))
    def test_newtons_third_law(self, seed):
        system = mixed_system()
        rng = np.random.default_rng(seed)
        q = spread_positions(system, rng)
        out = total_eval(system, q)
        net = out.forces.reshape(-1, 3).sum(axis=0)
        assert np.max(np.abs(net)) < 1e-12

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
    @settings(max_examples=25, deadline=None)
    def test_translation_invariance(self, cx, cy, cz):
        system = mixed_system(n=5)
        rng = np.random.default_rng(11)
        q = spread_positions(system, rng)
        shift = np.tile([cx, cy, cz], system.n_particles)
        base = total_eval(system, q).potential
        moved = total_eval(system, q + shift).potential
        assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)
