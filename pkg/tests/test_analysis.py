"""Post-processing checks on synthetic data with known answers."""

import numpy as np
import pytest

from paraotoc.analysis import (
    ButterflyFit,
    butterfly_fit,
    grid_butterfly,
    symmetry_residual,
    wavefront_times,
    zero_mode_profile,
)
from paraotoc.errors import ConfigError, NumericalError
from paraotoc.models import AlternatingChain, HoppingChain
from paraotoc.otoc import LightConeGrid


def ramp_column(times, arrival, rate=0.02):
    # stays at 1, then decays linearly; crosses 0.99 exactly at `arrival`
    return 1.0 - rate * np.maximum(0.0, times - (arrival - 0.01 / rate))


class TestWavefront:
    def test_linear_ramp_crossing(self):
        times = np.linspace(0.0, 10.0, 201)
        vals = ramp_column(times, 5.0)
        got = wavefront_times(times, vals)
        assert abs(got - 5.0) < 1e-10

    def test_crossing_between_grid_points(self):
        times = np.array([0.0, 1.0, 2.0])
        vals = np.array([1.0, 1.0, 0.95])
        # linear segment from 1.0 to 0.95: hits 0.99 one fifth in
        got = wavefront_times(times, vals)
        assert abs(got - 1.2) < 1e-12

    def test_never_crossing_is_nan(self):
        times = np.linspace(0.0, 3.0, 7)
        vals = np.ones_like(times)
        assert np.isnan(wavefront_times(times, vals))

    def test_grid_columns(self):
        times = np.linspace(0.0, 10.0, 401)
        cols = np.stack([ramp_column(times, a) for a in (2.0, 4.5, 7.0)], axis=1)
        got = wavefront_times(times, cols)
        assert np.abs(got - [2.0, 4.5, 7.0]).max() < 1e-10

    def test_threshold_monotonicity(self):
        times = np.linspace(0.0, 10.0, 401)
        vals = ramp_column(times, 3.0, rate=0.05)
        fractions = [0.01, 0.05, 0.1, 0.2]
        arrivals = [wavefront_times(times, vals, f) for f in fractions]
        assert all(b >= a - 1e-12 for a, b in zip(arrivals, arrivals[1:]))

    def test_time_rescaling(self):
        times = np.linspace(0.0, 10.0, 401)
        vals = ramp_column(times, 4.0)
        base = wavefront_times(times, vals)
        scaled = wavefront_times(3.0 * times, vals)
        assert abs(scaled - 3.0 * base) < 1e-12 * max(1.0, abs(scaled))

    def test_validation(self):
        times = np.linspace(0.0, 1.0, 5)
        vals = np.ones(5)
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(ConfigError):
                wavefront_times(times, vals, bad)
        with pytest.raises(ConfigError):
            wavefront_times(times[::-1], vals)
        with pytest.raises(ConfigError):
            wavefront_times(times, np.ones(6))


class TestButterfly:
    @staticmethod
    def synthetic_arrivals(j, ks, v_left, v_right, offset=0.0):
        ks = np.asarray(ks)
        out = np.where(ks > j, (ks - j) / v_right, (j - ks) / v_left)
        return out + offset

    def test_recovers_known_velocities(self):
        j = 10
        ks = np.array([4, 6, 8, 12, 14, 16])
        arrivals = self.synthetic_arrivals(j, ks, 1.5, 2.5, offset=0.4)
        fit = butterfly_fit(j, ks, arrivals)
        assert fit.v_left == pytest.approx(1.5, rel=1e-12)
        assert fit.v_right == pytest.approx(2.5, rel=1e-12)
        assert fit.ratio == pytest.approx(2.5 / 1.5, rel=1e-12)
        assert fit.stderr_left < 1e-10
        assert fit.n_left == 3 and fit.n_right == 3

    def test_nan_arrivals_are_dropped(self):
        j = 10
        ks = np.array([2, 4, 6, 8, 12, 14, 16, 18])
        arrivals = self.synthetic_arrivals(j, ks, 2.0, 2.0)
        arrivals[0] = np.nan
        arrivals[-1] = np.nan
        fit = butterfly_fit(j, ks, arrivals)
        assert fit.n_left == 3 and fit.n_right == 3
        assert fit.v_left == pytest.approx(2.0, rel=1e-12)

    def test_too_few_arrivals(self):
        j = 10
        ks = np.array([8, 9, 12, 14, 16])
        arrivals = self.synthetic_arrivals(j, ks, 2.0, 2.0)
        with pytest.raises(NumericalError, match="left"):
            butterfly_fit(j, ks, arrivals)

    def test_degenerate_arrivals(self):
        j = 5
        ks = np.array([2, 3, 4, 6, 7, 8])
        arrivals = np.full(6, 1.0)
        with pytest.raises(NumericalError):
            butterfly_fit(j, ks, arrivals)

    def test_velocity_rescaling(self):
        j = 10
        ks = np.array([4, 6, 8, 12, 14, 16])
        arrivals = self.synthetic_arrivals(j, ks, 1.5, 2.5, offset=0.4)
        base = butterfly_fit(j, ks, arrivals)
        scaled = butterfly_fit(j, ks, 2.0 * arrivals)
        assert scaled.v_left == pytest.approx(base.v_left / 2.0, rel=1e-12)
        assert scaled.v_right == pytest.approx(base.v_right / 2.0, rel=1e-12)
        assert scaled.ratio == pytest.approx(base.ratio, rel=1e-12)

    def test_grid_extraction(self):
        j = 6
        ks = (2, 3, 4, 8, 9, 10)
        times = np.linspace(0.0, 8.0, 801)
        arrivals = self.synthetic_arrivals(j, np.array(ks), 1.5, 2.0, offset=0.5)
        f = np.stack([ramp_column(times, a) for a in arrivals], axis=1)
        grid = LightConeGrid(times, ks, f.astype(np.complex128),
                             np.zeros(times.size), False)
        fit = grid_butterfly(grid, j)
        assert isinstance(fit, ButterflyFit)
        assert fit.v_left == pytest.approx(1.5, rel=1e-6)
        assert fit.v_right == pytest.approx(2.0, rel=1e-6)


class TestSymmetryResidual:
    def test_special_angle_vanishes(self):
        model = HoppingChain(n_spins=3, t2=0.5, theta=np.pi / 6, phi=0.9)
        assert symmetry_residual(model) < 1e-10

    def test_generic_angle_is_order_one(self):
        model = HoppingChain(n_spins=3, t2=0.5, theta=0.0, phi=0.9)
        assert symmetry_residual(model) > 0.1

    def test_wrong_model_rejected(self):
        with pytest.raises(ConfigError):
            symmetry_residual(AlternatingChain(n_spins=3, j2=0.2))


class TestZeroModeProfile:
    MODEL = AlternatingChain(n_spins=3, j1=1.0, j2=0.2, varphi=-np.pi / 6)

    def test_boundary_pair_stays_coherent(self):
        profile = zero_mode_profile(self.MODEL, t_max=2.0, stride=0.25,
                                    method="ed")
        assert profile.far_mode == 6
        assert profile.ks == tuple(range(2, 7))
        assert profile.far_min_re_f > 0.9
        assert np.all(profile.trusted)
        assert profile.far_c.shape == profile.times.shape

    def test_probe_subset(self):
        profile = zero_mode_profile(self.MODEL, t_max=1.0, stride=0.25,
                                    ks=(4, 6), method="ed")
        assert profile.ks == (4, 6)
        assert profile.re_f.shape == (5, 2)

    def test_mpo_route_matches_ed(self):
        mpo = zero_mode_profile(self.MODEL, t_max=1.0, dt=0.0125, stride=0.25,
                                chi=200, ks=(6,))
        exact = zero_mode_profile(self.MODEL, t_max=1.0, stride=0.25,
                                  ks=(6,), method="ed")
        assert np.abs(mpo.re_f - exact.re_f).max() < 2e-3
        assert not mpo.budget_exceeded
