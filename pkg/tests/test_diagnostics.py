"""
Tests for the diagnostics suite
"""
import numpy as np
import pytest

from svwave.config import InitialConfig, SigmaConfig, SpeedConfig
from svwave.diagnostics import (
    Check,
    DecayTable,
    commutator_checks,
    commutator_study,
    continuity_checks,
    continuity_ensemble,
    continuity_moduli,
    convergence_batch,
    cutoff_equivalence,
    difference_bound_check,
    energy,
    energy_budget_check,
    energy_growth_scenario,
    energy_identity_report,
    energy_identity_residuals,
    holder_h_neg3,
    linear_exact_error,
    linear_exact_state,
    mean_drift_check,
    moment_ensemble,
    moment_uniformity,
    random_pairs,
    shared_noise_convergence,
    standard_commutator_fields,
    stopping_level,
    strong_order_study,
    summarize_ensemble,
    temporal_continuity_check,
    trajectory_checks,
    u_bounds_report,
)
from svwave.dynamics import SdeParams, SystemState
from svwave.errors import InvalidArgumentError, NumericalFailureError
from svwave.integrator import Trajectory, simulate
from svwave.noise import generate
from svwave.spectral_torus import SpectralField, from_modes, wavenumbers
from svwave.wave_speed import ConstantSpeed, CosineSpeed

from conftest import make_config


def synthetic_trajectory(times, rows, N):
    """Trajectory with R = S given by rows of coefficients"""
    params = SdeParams(0.05, CosineSpeed())
    states = [SystemState(t, SpectralField(c), SpectralField(c), N) for t, c in zip(times, rows)]
    return Trajectory(states, np.zeros(len(states)), params, times[1] - times[0])


def linear_config(tmp_path, **changes):
    return make_config(tmp_path, speed=SpeedConfig('constant', (1.0,)),
                       sigma=SigmaConfig('constant', (0.0,)), **changes)


class TestResultTypes:

    def test_check_constructors(self):
        assert Check.at_most("a", 1.0, 2.0).passed
        assert Check.at_most("a", 1.0, 2.0).margin == 1.0
        assert not Check.at_least("b", 1.0, 2.0).passed
        within = Check.within("c", 0.5, 0.4, 0.65)
        assert within.passed and within.bound == [0.4, 0.65]
        assert within.margin == pytest.approx(0.1)
        assert Check.holds("d", True).to_dict() == {
            'name': "d", 'measured': 0.0, 'bound': None, 'passed': True, 'margin': 0.0}

    def test_decay_table_slope(self):
        table = DecayTable("delta", [0.2, 0.1, 0.05], [4e-2, 1e-2, 2.5e-3])
        assert table.slope == pytest.approx(2.0)
        assert table.is_decreasing()
        assert table.rows()[0] == (0.2, 0.04)
        assert table.to_dict()['label'] == "delta"

    def test_decay_table_slack(self):
        table = DecayTable("h", [4.0, 2.0, 1.0], [1.0, 1.05, 0.5])
        assert not table.is_decreasing()
        assert table.is_decreasing(slack=0.1)

    def test_decay_table_validation(self):
        with pytest.raises(InvalidArgumentError):
            DecayTable("dt", [0.1, 0.2], [1.0, 0.5])
        with pytest.raises(InvalidArgumentError):
            DecayTable("dt", [0.2, 0.1], [1.0, -0.5])
        with pytest.raises(InvalidArgumentError):
            DecayTable("dt", [0.2, 0.1], [1.0])

    def test_degenerate_tables(self):
        assert np.isnan(DecayTable("dt", [0.2, 0.1], [0.0, 1.0]).slope)
        assert DecayTable("dt", [0.2, 0.1], [0.0, 0.0]).is_decreasing()

    def test_decay_after_peak(self):
        rising_first = DecayTable("delta", [0.2, 0.1, 0.05, 0.025], [1.0, 1.7, 0.3, 0.01])
        assert not rising_first.is_decreasing(slack=0.1)
        assert rising_first.is_decreasing_after_peak(slack=0.1)
        rising_late = DecayTable("delta", [0.2, 0.1, 0.05, 0.025], [2.0, 0.3, 0.5, 0.01])
        assert not rising_late.is_decreasing_after_peak(slack=0.1)
        assert DecayTable("delta", [0.2, 0.1], [0.0, 0.0]).is_decreasing_after_peak()


class TestEnergy:

    def test_energy_of_a_state(self):
        state = SystemState(0.0, from_modes([("sin", 1, 1.0)]), from_modes([("cos", 2, 1.0)]), 4)
        E, D = energy(state)
        assert E == pytest.approx(1.0)
        assert D == pytest.approx(0.5 * (2 * np.pi) ** 2 + 0.5 * (4 * np.pi) ** 2)

    def test_noiseless_identity_holds(self, noiseless_config):
        trajectory = simulate(noiseless_config, noiseless_config.brownian_path())
        residuals = energy_identity_residuals(trajectory)
        assert residuals.size == noiseless_config.step_count()
        assert energy_identity_report(trajectory) <= 5e-3

    def test_identity_needs_noiseless_run(self, small_config):
        trajectory = simulate(small_config, small_config.brownian_path())
        with pytest.raises(InvalidArgumentError):
            energy_identity_residuals(trajectory)

    def test_budget_checks_pass(self, small_config):
        state = small_config.initial_state()
        checks = energy_budget_check(state, small_config.sde_params())
        assert len(checks) == 2
        assert all(check.passed for check in checks)

    def test_mean_drift_check(self, small_config):
        trajectory = simulate(small_config, small_config.brownian_path())
        assert mean_drift_check(trajectory).passed

    def test_trajectory_checks_follow_the_run(self, small_config, noiseless_config, tmp_path):
        noisy = simulate(small_config, small_config.brownian_path())
        assert [c.name for c in trajectory_checks(noisy)] == ["mean(R - S) conservation"]
        quiet = simulate(noiseless_config, noiseless_config.brownian_path())
        assert len(trajectory_checks(quiet)) == 2
        cut = make_config(tmp_path, cutoff_k=10.0)
        assert trajectory_checks(simulate(cut, cut.brownian_path())) == []


class TestLinearCase:

    def test_exact_state_at_start(self):
        state = SystemState(0.0, from_modes([("sin", 1, 1.0)]), from_modes([("sin", 1, -1.0)]), 4)
        assert np.allclose(linear_exact_state(state, 1.0, 0.1, 0.0).R.coeffs, state.R.coeffs)

    def test_exact_state_decays_and_rotates(self):
        state = SystemState(0.0, from_modes([("cos", 1, 1.0)]), from_modes([("cos", 1, 1.0)]), 4)
        later = linear_exact_state(state, 2.0, 0.1, 0.3)
        k = wavenumbers(3)[1]
        assert later.R.coeffs[1] == pytest.approx(0.5 * np.exp((-0.1 * k**2 + 2j * k) * 0.3))
        assert later.S.coeffs[1] == pytest.approx(np.conj(later.R.coeffs[1]))

    def test_scheme_error_within_first_order_bound(self, tmp_path):
        config = linear_config(tmp_path)
        error, bound = linear_exact_error(simulate(config, config.brownian_path()))
        assert 0 < error <= bound

    def test_needs_constant_speed(self, noiseless_config):
        trajectory = simulate(noiseless_config, noiseless_config.brownian_path())
        with pytest.raises(InvalidArgumentError):
            linear_exact_error(trajectory)


class TestMoments:

    def test_small_ensemble(self, small_config):
        summary = moment_ensemble(small_config, range(100, 108), p=3.0)
        assert summary.path_count == 8
        assert sorted(summary.moments) == [1.0, 2.0, 3.0]
        assert summary.lyapunov_monotone()
        assert summary.blown_up == []
        assert all(r['sup_energy'] >= 0 for r in summary.radii.values())

    def test_zeroth_moment_is_one(self):
        results = [(s, (1.0 + 0.3 * s, 0.2 + 0.1 * s)) for s in range(5)]
        summary = summarize_ensemble(results, N=8, nu=0.1, ps=[0.0, 1.0], resamples=10)
        assert summary.moments[0.0] == {'sup_energy': 1.0, 'dissipation': 1.0}
        assert summary.radii[0.0] == {'sup_energy': 0.0, 'dissipation': 0.0}

    def test_noiseless_sup_energy_is_initial_energy(self, noiseless_config):
        summary = moment_ensemble(noiseless_config, range(8))
        E0, _ = energy(noiseless_config.initial_state())
        assert np.allclose(summary.sup_energy, E0, rtol=1e-12)
        assert summary.moments[1.0]['sup_energy'] == pytest.approx(E0)

    def test_ensemble_needs_eight_seeds(self, small_config):
        with pytest.raises(InvalidArgumentError):
            moment_ensemble(small_config, range(7))

    def test_blown_up_paths_are_excluded(self):
        results = [(0, (1.0, 0.5)), (1, None), (2, (1.2, 0.4)), (3, (0.9, 0.6))]
        summary = summarize_ensemble(results, N=8, nu=0.1, ps=[1.0, 2.0], resamples=10)
        assert summary.seeds == [0, 2, 3]
        assert summary.blown_up == [1]
        assert summary.moments[1.0]['sup_energy'] == pytest.approx(31 / 30)
        assert summary.moments[1.0]['dissipation'] == pytest.approx(0.05)

    def test_too_few_survivors(self):
        with pytest.raises(NumericalFailureError):
            summarize_ensemble([(0, (1.0, 0.5)), (1, None)], N=8, nu=0.1, ps=[1.0])

    def test_uniformity_ratios(self):
        base = [(s, (1.0 + 0.1 * s, 0.5)) for s in range(4)]
        grown = [(s, (2.0 * (1.0 + 0.1 * s), 0.5)) for s in range(4)]
        a = summarize_ensemble(base, 8, 0.1, [1.0, 2.0], resamples=5)
        b = summarize_ensemble(base, 16, 0.1, [1.0, 2.0], resamples=5)
        c = summarize_ensemble(grown, 32, 0.1, [1.0, 2.0], resamples=5)
        checks = moment_uniformity([a, b, c])
        assert checks[0].passed and checks[0].measured == pytest.approx(1.0)
        assert not checks[1].passed and checks[1].measured == pytest.approx(4.0)


class TestTimeRegularity:

    def test_linear_in_time_is_lipschitz(self):
        times = np.linspace(0.0, 1.0, 33)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        trajectory = synthetic_trajectory(times, [t * base for t in times], 4)
        sup_ratio, exponent = holder_h_neg3(trajectory)
        assert exponent == pytest.approx(1.0, abs=1e-9)
        assert sup_ratio > 0

    def test_brownian_in_time_is_half_holder(self):
        K = 16
        times = np.linspace(0.0, 1.0, 1025)
        k = wavenumbers(K)
        # equal H^-3 weight per mode, each driven by its own Brownian path
        amplitudes = (1.0 + k**2) ** 1.5
        paths = np.array([generate(seed, 1.0, 10).values for seed in range(1, K + 1)])
        rows = []
        for j in range(times.size):
            coeffs = np.zeros(K + 1, dtype=complex)
            coeffs[1:] = -0.5j * amplitudes[1:] * paths[:, j]
            rows.append(coeffs)
        _, exponent = holder_h_neg3(synthetic_trajectory(times, rows, K + 1))
        assert 0.4 <= exponent <= 0.6

    def test_holder_needs_samples(self):
        times = np.linspace(0.0, 1.0, 10)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        with pytest.raises(InvalidArgumentError):
            holder_h_neg3(synthetic_trajectory(times, [base] * 10, 4))

    def test_constant_path_has_no_exponent(self):
        times = np.linspace(0.0, 1.0, 40)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        sup_ratio, exponent = holder_h_neg3(synthetic_trajectory(times, [base] * 40, 4))
        assert sup_ratio == 0.0
        assert np.isnan(exponent)

    def test_continuity_modulus_shrinks(self):
        times = np.linspace(0.0, 1.0, 257)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        rows = [t * base for t in times]
        # an off-cadence final sample is ignored
        times = np.append(times, 1.0 + 1 / 512)
        rows.append(rows[-1])
        result = temporal_continuity_check(synthetic_trajectory(times, rows, 4), levels=4)
        assert result['spacings'] == pytest.approx([8 / 256, 4 / 256, 2 / 256, 1 / 256])
        assert result['exponent'] == pytest.approx(1.0, abs=1e-9)
        assert [check.name for check in result['checks']] == ["modulus shrinks under refinement"]
        assert result['checks'][0].passed

    def test_continuity_needs_samples(self):
        times = np.linspace(0.0, 1.0, 100)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        with pytest.raises(InvalidArgumentError):
            temporal_continuity_check(synthetic_trajectory(times, [base] * 100, 4))

    SPACINGS = (8e-3, 4e-3, 2e-3, 1e-3)

    def test_half_exponent_passes(self):
        table = DecayTable("h", self.SPACINGS, [0.3 * h**0.5 for h in self.SPACINGS])
        checks = continuity_checks(table, noisy=True)
        assert [check.name for check in checks] == ["modulus shrinks under refinement",
                                                      "modulus exponent (noisy)"]
        assert all(check.passed for check in checks)
        assert checks[1].measured == pytest.approx(0.5)

    def test_small_exponent_fails_band(self):
        table = DecayTable("h", self.SPACINGS, [h**0.2 for h in self.SPACINGS])
        shrinks, exponent = continuity_checks(table, noisy=True)
        assert shrinks.passed
        assert not exponent.passed

    def test_growing_modulus_fails(self):
        table = DecayTable("h", self.SPACINGS, [0.01, 0.02, 0.03, 0.04])
        assert not continuity_checks(table, noisy=False)[0].passed

    def test_ensemble_averages_paths(self):
        tables = [DecayTable("h", self.SPACINGS, [a * h**0.5 for h in self.SPACINGS]) for a in (0.2, 0.6)]
        report = continuity_ensemble(tables)
        assert report['moduli'] == pytest.approx([0.4 * h**0.5 for h in self.SPACINGS])
        assert report['exponent'] == pytest.approx(0.5)
        assert report['path_exponents'] == pytest.approx([0.5, 0.5])
        with pytest.raises(NumericalFailureError):
            continuity_ensemble([])

    def test_simulated_paths(self, tmp_path):
        config = make_config(tmp_path, T=0.256)
        tables = [continuity_moduli(simulate(config, config.brownian_path(seed)), levels=4)
                  for seed in (11, 12, 13, 14)]
        assert tables[0].parameters == pytest.approx(self.SPACINGS)
        report = continuity_ensemble(tables)
        assert report['checks'][0].passed
        assert 0.25 < report['exponent'] < 0.9

    def test_simulated_noiseless_path_is_lipschitz(self, tmp_path):
        config = make_config(tmp_path, T=0.256, sigma=SigmaConfig('constant', (0.0,)))
        report = temporal_continuity_check(simulate(config, config.brownian_path()))
        assert len(report['checks']) == 1 and report['checks'][0].passed
        assert report['exponent'] == pytest.approx(1.0, abs=0.1)

    def test_u_bounds_along_a_run(self, noiseless_config):
        trajectory = simulate(noiseless_config, noiseless_config.brownian_path())
        report = u_bounds_report(trajectory)
        assert all(check.passed for check in report['checks'])
        assert report['sup_u'] <= report['sup_u_bound']
        assert report['dt_u_l2'] == pytest.approx(report['dt_u_l2_finite_difference'], rel=0.1)


class TestCommutators:

    DELTAS = (0.01, 0.005, 0.0025, 0.00125)

    def test_commutators_decay(self, zero_mean_pair):
        R, S = zero_mean_pair
        tables = commutator_study(R, S, CosineSpeed(), self.DELTAS)
        assert sorted(tables) == ['c_dR', 'c_dS', 'ctilde_R', 'ctilde_S']
        assert all(check.passed for check in commutator_checks(tables))
        assert tables['c_dR'].slope > 2.0

    def test_standard_fields(self):
        R, S = standard_commutator_fields()
        assert R.mean == 0 and S.mean == 0
        assert R.coeff(2) == pytest.approx(0.15)
        assert S.coeff(1) == pytest.approx(-0.1j)

    def test_standard_fields_on_full_ladder(self):
        deltas = (0.2, 0.1, 0.05, 0.025, 0.0125)
        tables = commutator_study(*standard_commutator_fields(), CosineSpeed(), deltas)
        checks = commutator_checks(tables)
        assert len(checks) == 12
        assert all(check.passed for check in checks)
        for name in ('ctilde_R', 'ctilde_S'):
            errors = tables[name].errors
            assert errors[-1] <= errors[0] / 10

    def test_late_rise_fails_checks(self):
        tables = {'c_dR': DecayTable("delta", [0.2, 0.1, 0.05], [1.0, 0.01, 0.5])}
        checks = {check.name: check.passed for check in commutator_checks(tables)}
        assert checks == {"c_dR decay after peak": False, "c_dR positive decay slope": True,
                          "c_dR 10x decay": False}

    def test_linear_speed_has_no_nonlinear_commutator(self, zero_mean_pair):
        R, S = zero_mean_pair
        tables = commutator_study(R, S, ConstantSpeed(1.5), self.DELTAS)
        assert np.all(tables['ctilde_R'].errors == 0.0)
        assert np.all(tables['ctilde_S'].errors == 0.0)
        # a constant factor commutes with the mollifier
        assert np.max(tables['c_dR'].errors) <= 1e-20


class TestDifferenceBounds:

    def test_pairs_are_reproducible(self):
        a, b = random_pairs(3, 2), random_pairs(3, 2)
        assert np.array_equal(a[1][1][0].coeffs, b[1][1][0].coeffs)
        (R1, S1), (R2, S2) = a[0]
        assert abs(R1.mean) < 1e-15 and abs(S2.mean) < 1e-15

    def test_constant_speed_bounds(self):
        result = difference_bound_check(random_pairs(7, 200), ConstantSpeed(1.5))
        assert result['violations']['i'] == 0
        assert result['checks'][0].passed
        # with c constant both ratios are at most c0 / (1 + ...)
        assert 0 < result['constants']['ii'] < 1.5
        assert 0 < result['constants']['iii'] < 1.5

    def test_nonlinear_sup_bound(self):
        result = difference_bound_check(random_pairs(8, 20), CosineSpeed())
        assert result['violations']['i'] == 0

    def test_needs_two_pairs(self):
        with pytest.raises(InvalidArgumentError):
            difference_bound_check(random_pairs(1, 1), CosineSpeed())


class TestConvergence:

    def test_resolved_linear_runs_agree(self, tmp_path):
        config = linear_config(tmp_path)
        table = shared_noise_convergence(config, resolutions=(8, 16))
        assert table.parameters.tolist() == [1 / 8]
        assert table.errors[0] <= 1e-12

    def test_differences_shrink_with_resolution(self, small_config):
        table = shared_noise_convergence(small_config, resolutions=(8, 16, 32))
        assert table.errors[1] < table.errors[0]

    def test_resolutions_must_increase(self, small_config):
        with pytest.raises(InvalidArgumentError):
            shared_noise_convergence(small_config, resolutions=(16, 8))

    def test_batch_report(self, tmp_path):
        config = linear_config(tmp_path)
        report = convergence_batch(config, [1, 2], resolutions=(8, 16))
        assert sorted(report['curves']) == ['1', '2']
        assert report['blown_up'] == []
        assert all(check.passed for check in report['checks'])

    def test_strong_error_shrinks_with_step(self, small_config):
        table = strong_order_study(small_config, seeds=[1, 2, 3, 4], levels=2, reference_levels=2)
        assert table.parameters == pytest.approx([1e-3, 5e-4])
        assert 0 < table.errors[1] < table.errors[0]


class TestCutoffEquivalence:

    def test_large_level_matches_limit(self, small_config):
        result = cutoff_equivalence(small_config, small_config.brownian_path())
        assert result['distance'] <= 1e-10
        assert len(result['checks']) == 2
        assert all(check.passed for check in result['checks'])

    def test_low_energy_run_falls_back_to_scenario(self, small_config):
        # E stays below 1/2, so no level k has both norms below k before the crossing
        result = cutoff_equivalence(small_config, small_config.brownian_path())
        assert result['stopping_source'] == 'energy-growth scenario'
        assert result['k_small'] > 2.0
        assert 0 < result['stopping_time_limit'] < small_config.T
        assert result['stopping_time_cutoff'] == result['stopping_time_limit']

    def test_configured_run_crosses_mid_run(self, tmp_path):
        config = make_config(tmp_path, nu=0.0, sigma=SigmaConfig('constant', (0.0,)),
                             initial=InitialConfig('modes', (('sin', 1, 1.2),), (('sin', 1, -1.2),)))
        result = cutoff_equivalence(config, config.brownian_path())
        assert result['stopping_source'] == 'configured run'
        assert result['k_small'] > 1.44
        assert result['stopping_time_limit'] > 0
        assert result['stopping_time_cutoff'] == result['stopping_time_limit']
        assert all(check.passed for check in result['checks'])

    def test_small_level_is_crossed_at_start(self, small_config):
        result = cutoff_equivalence(small_config, small_config.brownian_path(), k_small=0.2)
        assert result['stopping_source'] == 'configured run'
        assert result['stopping_time_limit'] == 0.0
        assert result['stopping_time_cutoff'] == 0.0
        assert result['checks'][1].passed

    def test_no_level_without_growth(self):
        times = np.linspace(0.0, 1.0, 5)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        assert stopping_level(synthetic_trajectory(times, [base] * 5, 4)) is None

    def test_level_respects_norms(self):
        times = np.linspace(0.0, 1.0, 5)
        base = from_modes([("sin", 1, 1.0)]).coeffs
        # E = 2 ||s R||^2 = s^2 with ||R|| = s / sqrt(2)
        rows = [s * base for s in (1.2, 1.3, 1.4, 1.5, 1.6)]
        k = stopping_level(synthetic_trajectory(times, rows, 4))
        assert k == pytest.approx(0.5 * (1.44 + 2.56))

    def test_scenario_needs_data(self, small_config):
        zero = SystemState(0.0, SpectralField.zeros(3), SpectralField.zeros(3), 4)
        assert energy_growth_scenario(zero, small_config.sde_params()) is None
        state, params = energy_growth_scenario(small_config.initial_state(), small_config.sde_params())
        assert energy(state)[0] == pytest.approx(2.0)
        assert params.nu == 0.0 and params.sigma.is_zero
