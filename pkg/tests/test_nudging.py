"""Feedback-control (nudging) steps and the CFL advisory."""

import numpy as np
import pytest

from cdalab.errors import ConfigurationError
from cdalab.kse import KseParams, KseStepper
from cdalab.nse import NseParams, NseStepper
from cdalab.nudging import NudgingParams, cfl_check, nudged_kse_step, nudged_nse_step
from cdalab.spectral import Projector, SpectralField, l2_norm


class TestCflCheck:
    def test_canonical_pass(self):
        report = cfl_check(100.0, 0.01)
        assert report.bound == pytest.approx(200.0)
        assert report.within_bound

    def test_boundary_flagged(self):
        assert not cfl_check(200.0, 0.01).within_bound

    def test_margin(self):
        report = cfl_check(10.0, 0.01)
        assert report.within_bound
        assert report.margin == pytest.approx(20.0)
        assert "ok" in report.summary()


class TestParams:
    def test_negative_mu_rejected(self):
        with pytest.raises(ConfigurationError):
            NudgingParams(mu=-1.0)

    def test_v0_mode_validated(self):
        with pytest.raises(ConfigurationError):
            NudgingParams(mu=1.0, v0_mode="random")


class TestKseNudgedStep:
    def test_mu_zero_is_pure_model_step(self, spun_kse_coeffs):
        st = KseStepper(KseParams())
        proj = Projector(st.grid, 16)
        obs = spun_kse_coeffs * proj.observed_mask
        nudged = nudged_kse_step(spun_kse_coeffs, obs, 0.0, proj.observed_mask, st)
        assert np.array_equal(nudged, st.step(spun_kse_coeffs))

    def test_synchronized_state_gets_zero_increment(self, spun_kse_coeffs):
        st = KseStepper(KseParams())
        proj = Projector(st.grid, 16)
        obs = spun_kse_coeffs * proj.observed_mask
        nudged = nudged_kse_step(spun_kse_coeffs, obs, 100.0, proj.observed_mask, st)
        assert np.array_equal(nudged, st.step(spun_kse_coeffs))

    def test_increment_lives_in_observed_subspace(self, spun_kse_coeffs):
        st = KseStepper(KseParams())
        grid = st.grid
        proj = Projector(grid, 16)
        rng = np.random.default_rng(21)
        v = spun_kse_coeffs * (1 + 0.01 * rng.standard_normal(256)) * grid.dealias_mask
        v = 0.5 * (v + np.conj(np.roll(v[::-1], 1)))  # keep it Hermitian
        obs = spun_kse_coeffs * proj.observed_mask
        increment = nudged_kse_step(v, obs, 50.0, proj.observed_mask, st) - st.step(v)
        complement = SpectralField(grid, increment * ~proj.observed_mask)
        assert l2_norm(complement) < 1e-14 * max(l2_norm(SpectralField(grid, increment)), 1e-30)


class TestNseNudgedStep:
    def test_mu_zero_is_pure_model_step(self):
        params = NseParams(n=32, dt=2e-3)
        st = NseStepper(params)
        from cdalab.nse import NseSolver

        solver = NseSolver(params)
        solver.spin_up(20.0)
        v = solver.coeffs
        proj = Projector(st.grid, 5)
        obs = v * proj.observed_mask
        assert np.array_equal(nudged_nse_step(v, obs, 0.0, proj.observed_mask, st), st.step(v))

    def test_increment_is_plain_mu_dt(self):
        params = NseParams(n=32, dt=2e-3)
        st = NseStepper(params)
        proj = Projector(st.grid, 5)
        rng = np.random.default_rng(8)
        from cdalab.spectral import forward_transform

        v = forward_transform(st.grid, rng.standard_normal((32, 32))).coeffs * st.grid.dealias_mask
        v.reshape(-1)[0] = 0.0
        obs = np.zeros_like(v)
        increment = nudged_nse_step(v, obs, 100.0, proj.observed_mask, st) - st.step(v)
        expected = 100.0 * params.dt * ((obs - v) * proj.observed_mask)
        assert np.max(np.abs(increment - expected)) < 1e-14
