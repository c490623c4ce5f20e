"""Correlator driver checks: method agreement, bookkeeping, scans."""

import numpy as np
import pytest

from paraotoc import ed
from paraotoc.errors import ConfigError
from paraotoc.models import AlternatingChain, HoppingChain
from paraotoc.otoc import (
    LightConeGrid,
    OtocRequest,
    lightcone_scan,
    run_otoc,
    squared_commutator,
)

MODEL3 = HoppingChain(n_spins=3, t2=0.5, theta=0.3, phi=0.7)


def request(**overrides):
    base = dict(model=MODEL3, j=2, k=5, t_max=0.4, dt=0.01, stride=0.2,
                chi=200, cutoff=0.0, trunc_budget=1e-6, method="direct")
    base.update(overrides)
    return OtocRequest(**base)


class TestRequest:
    def test_record_times(self):
        req = request(t_max=0.55, stride=0.2, dt=0.01)
        assert np.allclose(req.record_times, [0.0, 0.2, 0.4])
        assert np.array_equal(request(t_max=0.0).record_times, [0.0])

    def test_mode_range(self):
        with pytest.raises(ConfigError):
            request(j=0)
        with pytest.raises(ConfigError):
            request(k=7)

    def test_stride_must_tile_dt(self):
        with pytest.raises(ConfigError):
            request(stride=0.015, dt=0.01)

    def test_timesplit_needs_even_tiling(self):
        request(stride=0.1, dt=0.01, method="timesplit")
        with pytest.raises(ConfigError):
            request(stride=0.05, dt=0.01, method="timesplit")

    def test_scalar_validation(self):
        for bad in (dict(dt=0.0), dict(t_max=-1.0), dict(stride=-0.1),
                    dict(chi=0), dict(cutoff=-1.0), dict(trunc_budget=0.0),
                    dict(method="dense")):
            with pytest.raises(ConfigError):
                request(**bad)

    def test_describe_round_trips(self):
        info = request().describe()
        assert info["model"]["kind"] == "HoppingChain"
        assert info["model"]["t2"] == 0.5
        assert info["method"] == "direct"


class TestMethodAgreement:
    @pytest.mark.parametrize("j,k", [(2, 5), (5, 2), (3, 3)])
    def test_direct_tracks_ed(self, j, k):
        req = request(j=j, k=k, t_max=0.6, dt=0.005, stride=0.2)
        series = run_otoc(req)
        exact = ed.otoc_exact(MODEL3, j, k, series.times)
        assert np.abs(series.f - exact).max() < 5e-4

    @pytest.mark.parametrize("j,k", [(2, 5), (5, 2)])
    def test_timesplit_tracks_ed(self, j, k):
        req = request(j=j, k=k, t_max=0.6, dt=0.005, stride=0.2,
                      method="timesplit")
        series = run_otoc(req)
        exact = ed.otoc_exact(MODEL3, j, k, series.times)
        assert np.abs(series.f - exact).max() < 5e-4

    def test_start_value_is_one(self):
        for j, k in [(2, 5), (5, 2), (3, 3), (1, 6)]:
            for method in ("direct", "timesplit", "ed"):
                series = run_otoc(request(j=j, k=k, t_max=0.0, method=method))
                assert abs(series.f[0] - 1.0) < 1e-12
                assert abs(series.c[0]) < 1e-12

    def test_equivalence_across_parameter_points(self):
        points = [
            HoppingChain(n_spins=3, t2=0.3),
            HoppingChain(n_spins=3, t2=0.9, theta=np.pi / 6, phi=np.pi / 2),
            AlternatingChain(n_spins=3, j1=1.0, j2=0.4, varphi=-np.pi / 6),
        ]
        for model in points:
            results = []
            for method in ("direct", "timesplit", "ed"):
                series = run_otoc(OtocRequest(
                    model=model, j=2, k=5, t_max=0.5, dt=0.0125, stride=0.5,
                    chi=200, cutoff=0.0, method=method))
                results.append(series.f[-1])
            spread = max(abs(a - b) for a in results for b in results)
            assert spread < 1e-3

    def test_record_grouping_does_not_change_values(self):
        # measuring mid-way is a pure regrouping of the same gate algebra
        coarse = run_otoc(request(t_max=0.6, stride=0.3, dt=0.0125))
        fine = run_otoc(request(t_max=0.6, stride=0.15, dt=0.0125))
        assert np.abs(fine.f[::2] - coarse.f).max() < 1e-10


class TestBookkeeping:
    def test_c_is_twice_one_minus_re_f(self):
        series = run_otoc(request(t_max=0.4))
        assert np.array_equal(series.c, 2.0 * (1.0 - series.f.real))
        assert np.array_equal(squared_commutator(series.f), series.c)

    def test_truncation_loss_cancels_outside_the_cone(self):
        # the evolved window truncates hard at chi=4, yet the probe far
        # beyond the front still reads F = 1: the shed weight divides
        # out instead of masquerading as decay
        model = HoppingChain(n_spins=10, t2=0.8)
        series = run_otoc(OtocRequest(model=model, j=3, k=20, t_max=0.4,
                                      dt=0.05, stride=0.2, chi=4,
                                      trunc_budget=1.0))
        assert series.unitarity[-1] < 0.96
        assert np.abs(series.f - 1.0).max() < 1e-8

    def test_ed_dispatch_is_exact(self):
        series = run_otoc(request(method="ed", t_max=0.6))
        exact = ed.otoc_exact(MODEL3, 2, 5, series.times)
        assert np.abs(series.f - exact).max() < 1e-14
        assert np.all(series.trunc_weight == 0.0)
        assert np.all(series.unitarity == 1.0)
        assert not series.budget_exceeded

    def test_truncation_budget_flag(self):
        model = HoppingChain(n_spins=6, t2=0.8, theta=0.2)
        squeezed = run_otoc(OtocRequest(
            model=model, j=5, k=9, t_max=2.5, dt=0.05, stride=0.5, chi=2))
        assert squeezed.budget_exceeded
        assert np.all(np.diff(squeezed.trunc_weight) >= 0.0)
        assert squeezed.trunc_weight[-1] > 1e-6
        assert squeezed.unitarity[-1] < 1.0
        small = HoppingChain(n_spins=4, t2=0.8, theta=0.2)
        roomy = run_otoc(OtocRequest(
            model=small, j=3, k=7, t_max=1.0, dt=0.05, stride=0.5, chi=128))
        assert not roomy.budget_exceeded
        assert abs(roomy.unitarity[0] - 1.0) < 1e-10

    def test_meta_echoes_request(self):
        series = run_otoc(request(t_max=0.2))
        assert series.meta["chi"] == 200
        assert series.meta["model"]["n_spins"] == 3


class TestLightCone:
    MODEL = HoppingChain(n_spins=4, t2=0.5, theta=0.3, phi=0.7)

    def test_scan_matches_single_runs(self):
        ks = (1, 3, 4, 6, 8)
        grid = lightcone_scan(self.MODEL, j=4, ks=ks, t_max=0.4, dt=0.01,
                              stride=0.2, chi=200, cutoff=0.0)
        assert grid.ks == ks
        for col, k in enumerate(grid.ks):
            single = run_otoc(OtocRequest(
                model=self.MODEL, j=4, k=k, t_max=0.4, dt=0.01, stride=0.2,
                chi=200, cutoff=0.0))
            assert np.abs(grid.f[:, col] - single.f).max() < 1e-12

    def test_scan_deduplicates_and_sorts(self):
        grid = lightcone_scan(self.MODEL, j=2, ks=[5, 3, 5], t_max=0.2,
                              dt=0.01, stride=0.2, chi=64)
        assert grid.ks == (3, 5)
        assert grid.f.shape == (2, 2)
        assert isinstance(grid, LightConeGrid)
        assert np.array_equal(grid.c, 2.0 * (1.0 - grid.f.real))

    def test_ed_fallback_route(self):
        grid = lightcone_scan(MODEL3, j=2, ks=(1, 4, 6), t_max=0.4, dt=0.01,
                              stride=0.2, method="ed")
        for col, k in enumerate(grid.ks):
            exact = ed.otoc_exact(MODEL3, 2, k, grid.times)
            assert np.abs(grid.f[:, col] - exact).max() < 1e-14

    def test_scan_validation(self):
        with pytest.raises(ConfigError):
            lightcone_scan(MODEL3, j=2, ks=(), t_max=0.2)
        with pytest.raises(ConfigError):
            lightcone_scan(MODEL3, j=2, ks=(9,), t_max=0.2)
