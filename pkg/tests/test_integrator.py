"""
Tests for the integrating-factor Euler-Maruyama stepper
"""
import logging

import numpy as np
import pytest

from svwave.dynamics import SdeParams, SystemState
from svwave.errors import BlowUpError, InvalidArgumentError
from svwave.integrator import (
    BLOW_UP_THRESHOLD,
    cfl_limit,
    integrate,
    integrating_factor,
    simulate,
    step,
)
from svwave.noise import SigmaProfile, path_for_steps, sample_values
from svwave.spectral_torus import from_modes, wavenumbers
from svwave.wave_speed import ConstantSpeed, CosineSpeed

from conftest import make_config


SILENT = SigmaProfile('constant', (0.0,))
NOISE = SigmaProfile('sine', (0.1, 0.05))


def linear_state(N=8):
    R = from_modes([("sin", 1, 0.5), ("cos", 3, 0.2)])
    S = from_modes([("sin", 1, -0.5), ("cos", 3, 0.2)])
    return SystemState(0.0, R, S, N)


class TestStep:

    def test_integrating_factor(self):
        factor = integrating_factor(3, 0.1, 1e-3)
        assert factor[0] == 1.0
        assert factor[2] == pytest.approx(np.exp(-0.1 * (4 * np.pi) ** 2 * 1e-3))

    def test_linear_step_per_mode(self):
        state = linear_state()
        c0, nu, dt = 1.0, 0.05, 1e-3
        new = step(state, SdeParams(nu, ConstantSpeed(c0), SILENT), dt, 0.0)
        k = wavenumbers(state.K)
        expected = np.exp(-nu * k**2 * dt) * (1 + 1j * c0 * k * dt) * state.R.coeffs
        assert np.allclose(new.R.coeffs, expected, atol=1e-13)
        assert new.t == pytest.approx(dt)

    def test_zero_increment_skips_noise(self):
        state = linear_state()
        noisy = step(state, SdeParams(0.05, CosineSpeed(), NOISE), 1e-3, 0.0)
        silent = step(state, SdeParams(0.05, CosineSpeed(), SILENT), 1e-3, 0.0)
        # sigma only enters through the Ito correction when dW = 0
        assert not np.array_equal(noisy.R.coeffs, silent.R.coeffs)
        assert np.allclose(noisy.R.coeffs, silent.R.coeffs, atol=1e-2)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(InvalidArgumentError):
            step(linear_state(), SdeParams(0.05, CosineSpeed()), 0.0, 0.0)

    def test_blow_up_is_detected(self):
        huge = from_modes([("sin", 1, 10 * BLOW_UP_THRESHOLD)])
        state = SystemState(0.0, huge, huge, 4)
        with pytest.raises(BlowUpError) as excinfo:
            step(state, SdeParams(0.0, ConstantSpeed(), SILENT), 1e-3, 0.0)
        assert excinfo.value.t == pytest.approx(1e-3)
        assert excinfo.value.norm > BLOW_UP_THRESHOLD


class TestIntegrate:

    def test_single_state_for_zero_steps(self):
        trajectory = integrate(linear_state(), SdeParams(0.05, CosineSpeed()), 1e-3, [0.0])
        assert len(trajectory.states) == 1
        assert trajectory.final.t == 0.0

    def test_cadence_and_exact_times(self):
        w = np.zeros(11)
        trajectory = integrate(linear_state(), SdeParams(0.05, CosineSpeed(), SILENT), 1e-3, w, cadence=3)
        assert trajectory.times == pytest.approx([0.0, 3e-3, 6e-3, 9e-3, 10e-3], abs=1e-15)
        assert trajectory.w_samples.size == 5

    def test_rejects_bad_cadence(self):
        with pytest.raises(InvalidArgumentError):
            integrate(linear_state(), SdeParams(0.05, CosineSpeed()), 1e-3, [0.0, 0.1], cadence=0)

    def test_linear_energy_decays(self):
        w = np.zeros(51)
        trajectory = integrate(linear_state(), SdeParams(0.05, ConstantSpeed(), SILENT), 1e-3, w)
        assert np.all(np.diff(trajectory.energies()) <= 0)

    def test_noisy_run_conserves_mean_difference(self):
        path = path_for_steps(seed=5, dt=1e-3, n_steps=100)
        state = SystemState(0.0, from_modes([("sin", 1, 0.5), ("const", 0, 0.3)]),
                            from_modes([("cos", 2, 0.4), ("const", 0, 0.3)]), 16)
        trajectory = integrate(state, SdeParams(0.05, CosineSpeed(), NOISE), 1e-3,
                               sample_values(path, 1e-3, 100))
        means = trajectory.mean_differences()
        assert np.max(np.abs(means - means[0])) <= 1e-12

    def test_runs_are_deterministic(self):
        path = path_for_steps(seed=6, dt=1e-3, n_steps=20)
        w = sample_values(path, 1e-3, 20)
        params = SdeParams(0.05, CosineSpeed(), NOISE)
        a = integrate(linear_state(16), params, 1e-3, w)
        b = integrate(linear_state(16), params, 1e-3, w)
        assert all(np.array_equal(x.R.coeffs, y.R.coeffs) for x, y in zip(a.states, b.states))

    def test_crossing_is_recorded_once(self):
        w = np.zeros(21)
        trajectory = integrate(linear_state(), SdeParams(0.05, CosineSpeed(), SILENT), 1e-3, w,
                               monitor_k=0.1)
        assert trajectory.stopping_time == 0.0
        assert len(trajectory.events) == 1

    def test_mid_run_crossing_matches_first_sample_above_level(self):
        # inviscid and noiseless: each explicit step adds dt^2 ||drift||^2 to the energy
        params = SdeParams(0.0, ConstantSpeed(1.0), SILENT)
        w = np.zeros(41)
        free = integrate(linear_state(), params, 1e-3, w)
        energies = free.energies()
        assert np.all(np.diff(energies) > 0)
        k = 0.5 * (energies[0] + energies[-1])
        monitored = integrate(linear_state(), params, 1e-3, w, monitor_k=k)
        first = free.times[np.argmax(energies >= k)]
        assert monitored.stopping_time > 0
        assert monitored.stopping_time == first
        assert monitored.events == [(first, k)]

    def test_no_crossing_below_level(self):
        w = np.zeros(21)
        trajectory = integrate(linear_state(), SdeParams(0.05, CosineSpeed(), SILENT), 1e-3, w,
                               monitor_k=100.0)
        assert trajectory.stopping_time is None

    def test_rows_have_trajectory_columns(self):
        trajectory = integrate(linear_state(), SdeParams(0.05, CosineSpeed(), SILENT), 1e-3, np.zeros(4))
        rows = trajectory.rows()
        assert len(rows) == 4
        assert len(rows[0]) == 7
        assert rows[0][3] == pytest.approx(rows[0][1] ** 2 + rows[0][2] ** 2)

    def test_cfl_warning(self, caplog):
        params = SdeParams(0.05, CosineSpeed(), SILENT)
        limit = cfl_limit(params, 8)
        assert limit == pytest.approx(0.5 / (2 * np.pi * 7 * 2.0))
        with caplog.at_level(logging.WARNING):
            integrate(linear_state(), params, 2 * limit, [0.0, 0.0])
        assert any("CFL" in record.message for record in caplog.records)


class TestSimulate:

    def test_simulate_follows_config(self, small_config):
        trajectory = simulate(small_config, small_config.brownian_path())
        assert trajectory.N == 16
        assert trajectory.final.t == pytest.approx(small_config.T)
        assert len(trajectory.states) == small_config.step_count() + 1

    def test_resolution_override(self, small_config):
        trajectory = simulate(small_config, small_config.brownian_path(), N=8)
        assert trajectory.final.R.K == 7

    def test_step_override_uses_refined_path(self, small_config):
        path = small_config.brownian_path(extra_levels=1)
        trajectory = simulate(small_config, path, dt=small_config.dt / 2, cadence=2)
        assert trajectory.final.t == pytest.approx(small_config.T)
        assert np.array_equal(trajectory.w_samples,
                              sample_values(small_config.brownian_path(), small_config.dt,
                                            small_config.step_count()))

    def test_zero_horizon(self, tmp_path):
        config = make_config(tmp_path, T=0.0)
        trajectory = simulate(config, config.brownian_path())
        assert len(trajectory.states) == 1

    def test_cutoff_run_records_crossing(self, tmp_path):
        config = make_config(tmp_path, cutoff_k=0.05)
        trajectory = simulate(config, config.brownian_path())
        assert trajectory.stopping_time == 0.0
