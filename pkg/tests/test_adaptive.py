"""Adaptive parameter selection: the bound, the scan, the minimax, the rules."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aiamd import (Bond, Constraint, IntegratorSpec, NoBondsError, System,
                   UnstableStepSizeError, bond_periods, build_constrained_dumbbell,
                   build_harmonic_chain, dimensionless_step, energy_error_bound,
                   energy_error_bound_verlet, integrate, max_stable_dt, optimal_b,
                   select_b, stability_limit, verlet_timestep_check, worst_case_error)
from aiamd.adaptive import B_MAX, B_MIN
from conftest import ensemble_energies, ensemble_pair_system, ensemble_state


def rho_mp(h, b):
    """Arbitrary-precision evaluation of the bound formula (50 digits)."""
    with mp.workdps(50):
        h, b = mp.mpf(h), mp.mpf(b)
        half = mp.mpf(1) / 2
        inner = 2 * b ** 2 * (half - b) * h ** 2 + 4 * b ** 2 - 6 * b + 1
        product = (2 - b * h ** 2) * (2 - (half - b) * h ** 2) * (1 - b * (half - b) * h ** 2)
        if product <= 0:
            return mp.inf
        return h ** 4 * inner ** 2 / (8 * product)


def brute_force_b(h_bar, n_b=2001, n_h=4001):
    """Independent 2-d grid scan of the minimax problem."""
    bs = np.linspace(B_MIN, B_MAX, n_b)
    hs = h_bar * np.arange(1, n_h + 1) / n_h
    s = hs * hs
    best_b, best_val = None, np.inf
    for b in bs:
        inner = 2 * b * b * (0.5 - b) * s + 4 * b * b - 6 * b + 1
        product = (2 - b * s) * (2 - (0.5 - b) * s) * (1 - b * (0.5 - b) * s)
        if np.any(product <= 0):
            continue
        val = np.max(s * s * inner * inner / (8 * product))
        if val < best_val:
            best_b, best_val = float(b), float(val)
    return best_b, best_val


class TestBoundFormula:
    def test_quarter_point_value(self):
        # algebraic cancellation gives rho(h, 1/4) = h^4 / (32 (16 - h^2))
        assert abs(energy_error_bound(2.0, 0.25) - 1.0 / 24.0) < 1e-10
        assert abs(energy_error_bound_verlet(2.0) - 1.0 / 24.0) < 1e-10

    def test_vanishes_as_h_to_zero(self):
        assert energy_error_bound(1e-4, 0.2113) < 1e-14
        assert worst_case_error(0.2113, 1e-3) < 1e-10

    def test_instability_from_negative_factor(self):
        # at (3.0, 0.1932) the middle factor 2 - (1/2-b) h^2 = -0.7612 flips the product
        b, h = 0.1932, 3.0
        assert (2 - (0.5 - b) * h * h) == pytest.approx(-0.7612, abs=1e-4)
        assert energy_error_bound(h, b) == math.inf

    def test_matches_arbitrary_precision_reference(self):
        rng = np.random.default_rng(99)
        checked = 0
        while checked < 300:
            h = rng.uniform(0.05, 3.999)
            b = rng.uniform(0.05, 0.45)
            if abs(b - 0.25) < 1e-6:
                continue
            reference = rho_mp(h, b)
            ours = energy_error_bound(h, b)
            if reference == mp.inf:
                assert ours == math.inf
            else:
                assert abs(ours - float(reference)) <= 1e-9 * float(reference)
            checked += 1

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            energy_error_bound(-1.0, 0.2)
        with pytest.raises(ValueError):
            energy_error_bound(1.0, 0.6)
        with pytest.raises(ValueError):
            energy_error_bound_verlet(0.0)

    @given(st.floats(0.01, 3.99), st.floats(0.05, 0.45))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_or_infinite(self, h, b):
        value = energy_error_bound(h, b)
        assert value >= 0.0 or value == math.inf


class TestVerletEquivalentBound:
    def test_continuous_through_sqrt8(self):
        # the closed form bridges the 0/0 of the general formula at sqrt(8)
        mid = energy_error_bound_verlet(math.sqrt(8.0))
        assert math.isfinite(mid) and mid == pytest.approx(0.25, rel=1e-12)
        left = energy_error_bound_verlet(math.sqrt(8.0) - 1e-4)
        right = energy_error_bound_verlet(math.sqrt(8.0) + 1e-4)
        assert left == pytest.approx(mid, rel=1e-3)
        assert right == pytest.approx(mid, rel=1e-3)

    def test_general_formula_converges_to_closed_form_near_sqrt8(self):
        # b slightly below 1/4 keeps a pole pair within ~6 |b-1/4| of sqrt(8);
        # outside it the general formula approaches the closed form as b -> 1/4
        s8 = math.sqrt(8.0)
        for offset in (-1e-4, 1e-4):
            general = energy_error_bound(s8 + offset, 0.25 - 1e-9)
            closed = energy_error_bound_verlet(s8 + offset)
            assert general == pytest.approx(closed, rel=2e-3)
        # closer to 1/4 the pole pair tightens: values straddle the closed form
        low = energy_error_bound(s8 - 1e-4, 0.25 - 1e-6)
        high = energy_error_bound(s8 + 1e-4, 0.25 - 1e-6)
        assert low < energy_error_bound_verlet(s8) < high

    def test_infinite_at_four(self):
        assert energy_error_bound_verlet(4.0) == math.inf

    def test_stability_limits(self):
        assert stability_limit(0.25) == 4.0
        assert stability_limit(0.1932) == pytest.approx(math.sqrt(2.0 / (0.5 - 0.1932)))
        assert stability_limit(0.1932) == pytest.approx(2.5532, abs=2e-4)


class TestPeriodScan:
    def test_equal_mass_pair(self):
        system = build_harmonic_chain(2, 1.0, 1.0, 1.0)
        [(pair, period)] = bond_periods(system)
        assert pair == (0, 1)
        assert period == pytest.approx(2 * math.pi * math.sqrt(0.5), abs=1e-5)
        assert period == pytest.approx(4.44288, abs=1e-5)

    def test_stiffer_bond_is_faster(self):
        system = build_harmonic_chain(2, 1.0, 4.0, 1.0)
        [(_, period)] = bond_periods(system)
        assert period == pytest.approx(2.22144, abs=1e-5)

    def test_constrained_pair_excluded(self):
        system = build_constrained_dumbbell(1.0, 1.0)
        with pytest.raises(NoBondsError):
            bond_periods(system)

    def test_mixed_system_reports_only_bonds(self):
        system = System(masses=np.ones(4), dimension=3,
                        bonds=(Bond(0, 1, 1.0, 1.0),),
                        constraints=(Constraint(2, 3, 1.0),))
        assert len(bond_periods(system)) == 1


class TestDimensionlessStep:
    def test_reference_point(self):
        assert dimensionless_step(1.0, 2 * math.pi) == pytest.approx(math.sqrt(2.0))

    def test_abort_boundary(self):
        t_min = 3.7
        dt = math.sqrt(2.0) * t_min / math.pi
        assert dimensionless_step(dt, t_min) == pytest.approx(4.0, rel=1e-12)
        assert max_stable_dt(t_min) == pytest.approx(dt, rel=1e-12)

    def test_unit_safety_factor(self):
        assert dimensionless_step(1.0, math.pi, safety_factor=1.0) == pytest.approx(2.0)


class TestWorstCaseError:
    def test_infinite_when_interval_contains_instability(self):
        assert worst_case_error(0.1932, 3.0) == math.inf

    def test_verlet_equivalent_on_stable_interval(self):
        assert worst_case_error(0.25, 2.0) == pytest.approx(1.0 / 24.0, rel=1e-9)
        # rho(., 1/4) increases on (0, 4): the grid max sits at the right edge
        grid = energy_error_bound_verlet(2.0 * np.arange(1, 2001) / 2000)
        assert np.argmax(grid) == 1999

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            worst_case_error(0.1, 2.0)
        with pytest.raises(ValueError):
            worst_case_error(0.2113, -1.0)


class TestSelection:
    def test_recovers_fixed_scheme_at_two(self):
        b, _ = optimal_b(2.0)
        assert abs(b - 0.2113) <= 5e-4

    def test_clamps_to_minimum_error_member_for_small_steps(self):
        for h_bar in (0.1, 0.3, 0.5):
            b, _ = optimal_b(h_bar)
            assert b == B_MIN

    def test_approaches_verlet_equivalent_near_four(self):
        b, _ = optimal_b(3.95)
        assert b >= 0.245

    def test_rejects_h_bar_at_or_above_four(self):
        for h_bar in (4.0, 4.2):
            with pytest.raises(UnstableStepSizeError):
                optimal_b(h_bar)

    def test_agrees_with_brute_force_scan(self):
        rng = np.random.default_rng(5)
        for h_bar in rng.uniform(0.2, 3.95, size=20):
            ours, _ = optimal_b(float(h_bar))
            reference, _ = brute_force_b(float(h_bar))
            assert abs(ours - reference) <= 2e-3, f"h_bar={h_bar}"

    def test_nondecreasing_in_h_bar(self):
        values = [optimal_b(h)[0] for h in np.linspace(0.21, 3.94, 40)]
        assert all(b2 >= b1 for b1, b2 in zip(values, values[1:]))

    def test_select_b_end_to_end(self):
        system = build_harmonic_chain(8, 1.0, 1.0, 1.0)
        t_min = min(p for _, p in bond_periods(system))
        dt = 2.0 * t_min / (math.sqrt(2.0) * 2 * math.pi)  # h_bar = 2
        result = select_b(system, dt)
        assert result.h_bar == pytest.approx(2.0, rel=1e-12)
        assert abs(result.b_opt - 0.2113) <= 5e-4
        assert result.objective == pytest.approx(worst_case_error(result.b_opt, result.h_bar))

    def test_select_b_abort_names_the_bound(self):
        system = build_harmonic_chain(2, 1.0, 1.0, 1.0)
        t_min = bond_periods(system)[0][1]
        dt = math.sqrt(2.0) * t_min / math.pi * 1.01
        with pytest.raises(UnstableStepSizeError) as err:
            select_b(system, dt)
        assert err.value.dt_max == pytest.approx(math.sqrt(2.0) * t_min / math.pi)
        assert f"{err.value.dt_max:.6g}" in str(err.value)

    def test_select_b_requires_bonds(self):
        with pytest.raises(NoBondsError):
            select_b(build_constrained_dumbbell(1.0, 1.0), 0.1)


class TestEnergyErrorBoundHolds:
    @pytest.mark.parametrize("h,b", [(0.8, 0.2), (1.5, 0.22), (2.5, 0.245), (1.0, 0.25)])
    def test_ensemble_mean_below_bound(self, h, b):
        n_pairs, n_steps = 20_000, 20
        rng = np.random.default_rng(abs(hash((h, b))) % 2 ** 32)
        state = ensemble_state(rng.standard_normal(n_pairs), rng.standard_normal(n_pairs))
        system = ensemble_pair_system(n_pairs)
        before = ensemble_energies(state)
        traj = integrate(state, IntegratorSpec.two_stage(b), h, n_steps, system,
                         record_stride=0)
        delta = ensemble_energies(traj.final_state) - before
        mean = delta.mean()
        se = delta.std(ddof=1) / math.sqrt(n_pairs)
        bound = (energy_error_bound_verlet(h) if b == 0.25 else energy_error_bound(h, b))
        assert -3 * se <= mean <= bound + 3 * se


class TestTimestepCheck:
    def system_with_period(self, period):
        # T = 2 pi sqrt(mu / k) with mu = 0.5  =>  k = 2 pi^2 / T^2 * ... solve for k
        k = (2 * math.pi / period) ** 2 * 0.5
        return System(masses=np.ones(2), dimension=3, bonds=(Bond(0, 1, k, 1.0),))

    def test_error_rule(self):
        checks = verlet_timestep_check(self.system_with_period(4.0), 1.0)
        assert checks[0].status == "error"

    def test_warning_rule(self):
        checks = verlet_timestep_check(self.system_with_period(7.0), 1.0)
        assert checks[0].status == "warning"

    def test_ok_rule(self):
        checks = verlet_timestep_check(self.system_with_period(20.0), 1.0)
        assert checks[0].status == "ok"

    def test_scan_covers_every_bond(self):
        bonds = (Bond(0, 1, (2 * math.pi / 4.0) ** 2 * 0.5, 1.0),
                 Bond(1, 2, (2 * math.pi / 7.0) ** 2 * 0.5, 1.0),
                 Bond(2, 3, (2 * math.pi / 20.0) ** 2 * 0.5, 1.0))
        system = System(masses=np.ones(4), dimension=3, bonds=bonds)
        statuses = [c.status for c in verlet_timestep_check(system, 1.0)]
        assert statuses == ["error", "warning", "ok"]
