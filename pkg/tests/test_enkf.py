"""Stochastic ensemble Kalman filter operations."""

import numpy as np
import pytest

from cdalab.enkf import (
    EnkfParams,
    Ensemble,
    analysis_step,
    ensemble_mean,
    forecast_and_inflate,
    init_ensemble,
    recommended_min_members,
)
from cdalab.errors import BlowUpError, ConfigurationError, GainDegeneracyError
from cdalab.kse import KseParams, KseStepper
from cdalab.rng import SeedHub
from cdalab.spectral import (
    Projector,
    SpectralField,
    WaveGrid,
    observed_packing,
    state_packing,
)


def observed_field(grid, coeffs, m):
    return SpectralField(grid, coeffs * Projector(grid, m).observed_mask)


@pytest.fixture()
def kse_setup(spun_kse_coeffs):
    params = KseParams()
    stepper = KseStepper(params)
    grid = stepper.grid
    obs0 = observed_field(grid, spun_kse_coeffs, 16)
    return params, stepper, grid, obs0


class TestParams:
    def test_members_lower_bound(self):
        with pytest.raises(ConfigurationError):
            EnkfParams(members=1, sigma_e_sq=0.0, sigma_i_sq=0.0)

    def test_advisory_member_counts(self):
        grid1 = WaveGrid(1, 256, 32 * np.pi)
        assert recommended_min_members(grid1, 16) == 32
        grid2 = WaveGrid(2, 128, 2 * np.pi)
        assert recommended_min_members(grid2, 10) == 316


class TestInit:
    def test_zero_spread_copies_observation(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=8, sigma_e_sq=0.0, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(1))
        for k in range(8):
            assert np.array_equal(ens.coeffs[k], obs0.coeffs)

    def test_member_spread_matches_sigma(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=32, sigma_e_sq=1e-16, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(2))
        packing = observed_packing(grid, 16)
        spread = packing.pack(ens.coeffs).real.std(axis=0, ddof=1).mean()
        assert 0.5e-8 < spread < 1.5e-8

    def test_complement_is_zero(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=4, sigma_e_sq=1e-8, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(3))
        proj = Projector(grid, 16)
        assert np.all(ens.coeffs[:, ~proj.observed_mask] == 0)


class TestAnalysis:
    def test_collapsed_ensemble_degenerates(self, kse_setup):
        # identical members + sigma_E = 0: rank-0 innovation covariance
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=8, sigma_e_sq=0.0, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(4))
        with pytest.raises(GainDegeneracyError):
            analysis_step(ens, obs0, ep, 16)

    def test_undersized_ensemble_degenerates(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=16, sigma_e_sq=1e-16, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(5))
        with pytest.raises(GainDegeneracyError) as err:
            analysis_step(ens, obs0, ep, 16)
        assert err.value.condition > err.value.threshold or not np.isfinite(err.value.condition)

    def test_three_member_scalar_oracle(self):
        # one observed real coordinate, hand-checkable gain
        grid = WaveGrid(1, 8, 2 * np.pi)
        packing = state_packing(grid)
        m1 = np.flatnonzero(np.rint(np.fft.fftfreq(8, 1 / 8)).astype(int) == 1)[0]
        m2 = np.flatnonzero(np.rint(np.fft.fftfreq(8, 1 / 8)).astype(int) == 2)[0]

        def member(a, b):
            c = np.zeros(8, complex)
            c[m1] = a
            c[(-m1) % 8] = np.conj(a)
            c[m2] = b
            c[(-m2) % 8] = np.conj(b)
            return c

        values = [(1.0, 0.5), (2.0, -0.3), (4.0, 0.1)]
        stack = np.stack([member(a, b) for a, b in values])
        ep = EnkfParams(members=3, sigma_e_sq=0.0, sigma_i_sq=0.0)
        ens = Ensemble(grid, stack.copy(), dt=0.01, hub=SeedHub(6))
        obs = np.zeros(8, complex)
        obs[m1] = 1.5
        obs[(-m1) % 8] = 1.5
        analysis_step(ens, SpectralField(grid, obs), ep, cutoff_m=1)

        # independent oracle: scalar gain per state coordinate
        a = np.array([v[0] for v in values])
        b = np.array([v[1] for v in values])
        u = (a - a.mean()) / np.sqrt(2.0)
        gain_a = np.sum(u * u) / np.sum(u * u)  # = 1: observed coord itself
        gain_b = np.sum(((b - b.mean()) / np.sqrt(2.0)) * u) / np.sum(u * u)
        a_post = a + gain_a * (1.5 - a)
        b_post = b + gain_b * (1.5 - a)
        for k in range(3):
            assert abs(ens.coeffs[k, m1] - a_post[k]) < 1e-12
            assert abs(ens.coeffs[k, m2] - b_post[k]) < 1e-12

    def test_gain_shape_and_zero_innovation(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=40, sigma_e_sq=1e-16, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(7))
        gain = analysis_step(ens, obs0, ep, 16)
        state_dof = state_packing(grid).real_size
        obs_dof = observed_packing(grid, 16).real_size
        assert gain.shape == (state_dof, obs_dof)
        assert np.all(np.isfinite(gain))
        assert np.max(np.abs(gain @ np.zeros(obs_dof))) == 0.0

    def test_mean_fixed_when_obs_equals_mean(self, kse_setup):
        # innovation of the mean vanishes, so the member mean is preserved
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=48, sigma_e_sq=0.0, sigma_i_sq=0.0)
        hub = SeedHub(8)
        ens = init_ensemble(obs0, ep, 16, params.dt, hub)
        rng = np.random.default_rng(12)
        spec_noise = 1e-3 * (rng.standard_normal((48, 256)) + 1j * rng.standard_normal((48, 256)))
        packing = state_packing(grid)
        ens.coeffs = packing.unpack(packing.pack(ens.coeffs + spec_noise))
        mean_before = ens.coeffs.mean(axis=0)
        obs_mean = observed_field(grid, mean_before, 16)
        analysis_step(ens, obs_mean, ep, 16)
        assert np.max(np.abs(ens.coeffs.mean(axis=0) - mean_before)) < 1e-12

    def test_requires_forecast_phase(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=40, sigma_e_sq=1e-16, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(9))
        analysis_step(ens, obs0, ep, 16)
        with pytest.raises(ConfigurationError):
            analysis_step(ens, obs0, ep, 16)


class TestForecastInflate:
    def test_pure_propagation_keeps_equal_members_equal(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=4, sigma_e_sq=0.0, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(10))
        ens.phase = "analysis"
        forecast_and_inflate(ens, stepper, ep, 16)
        for k in range(1, 4):
            assert np.array_equal(ens.coeffs[k], ens.coeffs[0])
        assert ens.time == pytest.approx(params.dt)

    def test_inflation_restores_spread_floor(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=32, sigma_e_sq=0.0, sigma_i_sq=1e-14)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(11))
        ens.phase = "analysis"
        forecast_and_inflate(ens, stepper, ep, 16)
        packing = observed_packing(grid, 16)
        spread = packing.pack(ens.coeffs).real.std(axis=0, ddof=1).mean()
        assert spread > 0.5e-7

    def test_pre_inflation_mean_is_stashed(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=8, sigma_e_sq=0.0, sigma_i_sq=1e-6)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(12))
        ens.phase = "analysis"
        expected = stepper.step(ens.coeffs).mean(axis=0)
        forecast_and_inflate(ens, stepper, ep, 16)
        assert np.array_equal(ens.mean_before_inflation, expected)
        assert not np.array_equal(ens.coeffs.mean(axis=0), expected)

    def test_blow_up_names_member(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ep = EnkfParams(members=5, sigma_e_sq=0.0, sigma_i_sq=0.0)
        ens = init_ensemble(obs0, ep, 16, params.dt, SeedHub(13))
        ens.coeffs[3] = np.full(256, 1e12, dtype=complex)
        ens.phase = "analysis"
        with pytest.raises(BlowUpError) as err:
            forecast_and_inflate(ens, stepper, ep, 16)
        assert err.value.member == 3


class TestMean:
    def test_identical_members(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        stack = np.stack([obs0.coeffs] * 4)  # power of two: the mean is exact
        ens = Ensemble(grid, stack, dt=0.01)
        assert np.array_equal(ensemble_mean(ens).coeffs, obs0.coeffs)

    def test_antisymmetric_pair_cancels(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        ens = Ensemble(grid, np.stack([obs0.coeffs, -obs0.coeffs]), dt=0.01)
        assert np.max(np.abs(ensemble_mean(ens).coeffs)) == 0.0

    def test_matches_direct_summation(self, kse_setup):
        params, stepper, grid, obs0 = kse_setup
        rng = np.random.default_rng(30)
        stack = rng.standard_normal((5, 256)) + 1j * rng.standard_normal((5, 256))
        ens = Ensemble(grid, stack, dt=0.01)
        oracle = sum(stack[k] for k in range(5)) / 5.0
        assert np.max(np.abs(ensemble_mean(ens).coeffs - oracle)) < 1e-14
