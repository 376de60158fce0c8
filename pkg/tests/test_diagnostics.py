"""
Tests for flux, Pohozaev, exterior decay and uniqueness diagnostics
"""
import numpy as np
import pytest

from diagnostics import (Verdict, existence_check, exterior_decay, exterior_mass, flux, localized_flux_fraction,
                         pohozaev, uniqueness_probe)
from errors import ClusterNotIsolated
from monotone_solver import maximal_solve
from torus_field import Grid
from vortex_background import VortexConfiguration, build_background


@pytest.fixture(scope='module')
def coarse_vortex():
    cfg = VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.1)
    return cfg, build_background(cfg, Grid(n=64))


class TestFlux:
    """Quantized flux 4 pi N"""

    def test_single_vortex(self, one_vortex):
        _, _, report = one_vortex
        assert flux(report) == pytest.approx(4 * np.pi, rel=1e-6)

    def test_no_vortices(self):
        cfg = VortexConfiguration(points=[], epsilon=0.1)
        report = maximal_solve(cfg, build_background(cfg, Grid(n=32)))
        assert flux(report) == 0.0
        assert localized_flux_fraction(report) == 1.0

    def test_localized(self, one_vortex):
        _, _, report = one_vortex
        assert localized_flux_fraction(report) >= 0.99

    def test_existence_check(self):
        below = existence_check(VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.05))
        above = existence_check(VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.2))
        assert not below['above_bound']
        assert above['above_bound']
        assert above['critical_epsilon'] == pytest.approx(1 / np.sqrt(16 * np.pi))


class TestPohozaev:
    """Local Pohozaev identity on a ball around a cluster"""

    def test_single_vortex(self, one_vortex):
        _, _, report = one_vortex
        result = pohozaev(report, ball_radius_factor=8)
        assert result.l == 1
        assert result.rhs == pytest.approx(4 * np.pi)
        assert result.gap < 0.05
        assert result.to_row()['radius_factor'] == 8

    def test_coincident_double_vortex(self):
        cfg = VortexConfiguration(points=[(0.5, 0.5)], multiplicities=[2], epsilon=0.04)
        report = maximal_solve(cfg, build_background(cfg, Grid(n=256)))
        result = pohozaev(report, ball_radius_factor=10)
        assert result.l == 2
        assert result.rhs == pytest.approx(16 * np.pi)
        assert result.gap < 0.05

    @pytest.mark.slow
    def test_gap_shrinks_with_eps(self):
        gaps = []
        for eps, n in ((0.04, 256), (0.02, 512), (0.01, 1024)):
            cfg = VortexConfiguration(points=[(0.5, 0.5)], epsilon=eps)
            report = maximal_solve(cfg, build_background(cfg, Grid(n=n)))
            gaps.append(pohozaev(report, ball_radius_factor=10).gap)
        assert gaps[0] < 0.05
        assert gaps[1] <= gaps[0] + 1e-3
        assert gaps[2] <= gaps[1] + 1e-3

    def test_ball_must_fit(self, one_vortex):
        _, bg, _ = one_vortex
        with pytest.raises(ClusterNotIsolated, match="does not fit"):
            pohozaev(None, bg=bg, eps=0.05, ball_radius_factor=20)

    def test_other_cluster_inside(self):
        cfg = VortexConfiguration(points=[(0.5, 0.5), (0.5, 0.9)], epsilon=0.02)
        bg = build_background(cfg, Grid(n=64))
        with pytest.raises(ClusterNotIsolated, match="another cluster"):
            pohozaev(None, bg=bg, eps=0.02, ball_radius_factor=22)


class TestExterior:
    """Decay of u and of the mass density away from the cores"""

    def test_decay(self, one_vortex):
        _, _, report = one_vortex
        result = exterior_decay(report)
        assert len(result['rows']) == 6
        assert result['decreasing']
        assert 0.5 < result['rate'] < 2.0

    def test_mass(self, one_vortex):
        _, _, report = one_vortex
        result = exterior_mass(report)
        assert result['monotone']
        assert result['rows'][-1]['mass'] == 0.0
        assert result['rows'][0]['mass'] > result['rows'][1]['mass']


class TestUniqueness:
    """Newton restarts around the maximal solution"""

    def test_needs_two_trials(self, coarse_vortex):
        cfg, bg = coarse_vortex
        with pytest.raises(ValueError):
            uniqueness_probe(cfg, bg, trials=1)

    def test_unique_and_reproducible(self, coarse_vortex):
        cfg, bg = coarse_vortex
        first = uniqueness_probe(cfg, bg, trials=2, seed=5, workers=2)
        second = uniqueness_probe(cfg, bg, trials=2, seed=5, workers=1)
        assert first.verdict == Verdict.UNIQUE
        assert [row['trial'] for row in first.trials] == [0, 1, 2]
        assert first.trials[0]['perturbed'] is False
        assert first.lambda_min > 0
        assert [row['deviation'] for row in first.trials] == [row['deviation'] for row in second.trials]
        assert first.summary()['converged_trials'] == 3

    @pytest.mark.slow
    @pytest.mark.parametrize('separation', [20.0, 0.05])
    def test_two_vortex_regimes(self, separation):
        eps = 0.01
        half = 0.5 * separation * eps
        cfg = VortexConfiguration(points=[(0.5 - half, 0.5), (0.5 + half, 0.5)], epsilon=eps)
        result = uniqueness_probe(cfg, build_background(cfg, Grid(n=1024)), trials=5, seed=0)
        assert result.verdict == Verdict.UNIQUE
        assert result.max_deviation <= 1e-6
        assert result.lambda_min > 0
