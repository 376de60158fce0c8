"""
Tests for vortex configurations, the torus Green function and the singular background
"""
import numpy as np
import pytest
from pydantic import ValidationError

from errors import DiagonalPoint, VortexOnVortex
from torus_field import Grid, integrate
from vortex_background import (VortexConfiguration, build_background, classify_clusters, core_mask,
                               distance_to_vortices, green, green_displacement, green_gradient,
                               green_lower_bound, green_tail_bound, min_image, regular_part,
                               regular_part_gradient, torus_distance)


class TestVortexConfiguration:
    """Validation and derived quantities"""

    def test_defaults(self):
        cfg = VortexConfiguration(points=[(0.2, 0.3), (0.7, 0.1)], epsilon=0.05)
        assert cfg.multiplicities == [1, 1]
        assert cfg.N == 2

    def test_points_reduced_mod_one(self):
        cfg = VortexConfiguration(points=[(1.25, -0.25)], epsilon=0.05)
        assert cfg.points[0] == pytest.approx((0.25, 0.75))

    def test_records(self):
        cfg = VortexConfiguration.from_records([{'x': 0.5, 'y': 0.5, 'multiplicity': 3}], epsilon=0.02)
        assert cfg.N == 3
        assert cfg.alphas.tolist() == [3.0]

    def test_rejects_bad_multiplicity(self):
        with pytest.raises(ValidationError):
            VortexConfiguration(points=[(0.5, 0.5)], multiplicities=[0], epsilon=0.1)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            VortexConfiguration(points=[(0.5, 0.5)], multiplicities=[1, 1], epsilon=0.1)

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValidationError):
            VortexConfiguration(points=[], epsilon=0.0)

    def test_with_epsilon(self):
        cfg = VortexConfiguration(points=[(0.5, 0.5)], multiplicities=[2], epsilon=0.1)
        other = cfg.with_epsilon(0.05)
        assert other.epsilon == 0.05
        assert other.multiplicities == [2]


class TestGeometry:
    """Minimum-image reduction"""

    def test_min_image(self):
        assert min_image([0.9, -0.7]) == pytest.approx([-0.1, 0.3])

    def test_torus_distance_wraps(self):
        assert torus_distance((0.05, 0.5), (0.95, 0.5)) == pytest.approx(0.1)


class TestGreenFunction:
    """-Delta G = delta - 1 with zero mean"""

    def test_symmetric(self):
        x, y = (0.13, 0.71), (0.62, 0.24)
        assert abs(green(x, y) - green(y, x)) < 1e-10

    def test_periodic(self):
        y = (0.4, 0.4)
        assert abs(green((0.3, 0.2), y) - green((1.3, -0.8), y)) < 1e-12

    def test_mean_zero(self):
        n = 256
        h = 1.0 / n
        x = np.arange(n) * h
        pts = np.stack(np.meshgrid(x, x, indexing='ij'), axis=-1).reshape(-1, 2)
        # source at a cell center so no sample hits the singularity
        values = green_displacement(pts - np.array([0.5 + h / 2, 0.5 + h / 2]))
        assert abs(values.mean()) < 1e-4

    def test_laplacian_equals_one_off_diagonal(self):
        y = np.array([0.7, 0.6])
        x = np.array([0.3, 0.2])
        t = 1e-3
        e1, e2 = np.array([t, 0.0]), np.array([0.0, t])
        g = lambda p: float(green_displacement(p - y))
        lap = (g(x + e1) + g(x - e1) + g(x + e2) + g(x - e2) - 4 * g(x)) / t ** 2
        assert lap == pytest.approx(1.0, abs=1e-4)

    def test_gradient_matches_difference_quotient(self):
        d = np.array([0.21, -0.13])
        t = 1e-5
        fd = [(green_displacement(d + e) - green_displacement(d - e)) / (2 * t)
              for e in (np.array([t, 0.0]), np.array([0.0, t]))]
        assert green_gradient(d) == pytest.approx(fd, abs=1e-6)

    def test_log_behaviour_near_diagonal(self):
        d = np.array([1e-4, 0.0])
        assert green_displacement(d) == pytest.approx(-np.log(1e-4) / (2 * np.pi) + regular_part(d), abs=1e-10)

    def test_diagonal_rejected(self):
        with pytest.raises(DiagonalPoint):
            green((0.2, 0.3), (1.2, 0.3))

    def test_tail_bound_negligible(self):
        assert green_tail_bound() < 1e-12

    def test_lower_bound(self, rng):
        c0 = green_lower_bound()
        assert c0 >= 0
        for _ in range(20):
            x, y = rng.uniform(size=2), rng.uniform(size=2)
            if torus_distance(x, y) > 1e-3:
                assert green(x, y) >= -c0 - 1e-6


class TestRegularPart:
    """gamma = G + ln|x - y| / (2 pi)"""

    def test_identity(self):
        d = np.array([0.1, 0.05])
        expected = green_displacement(d) + np.log(np.hypot(*d)) / (2 * np.pi)
        assert regular_part(d) == pytest.approx(expected, abs=1e-10)

    def test_finite_at_zero(self):
        assert np.isfinite(regular_part(np.zeros(2)))
        assert regular_part_gradient(np.zeros(2)) == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_gradient_matches_difference_quotient(self):
        d = np.array([0.07, 0.02])
        t = 1e-5
        fd = [(regular_part(d + e) - regular_part(d - e)) / (2 * t)
              for e in (np.array([t, 0.0]), np.array([0.0, t]))]
        assert regular_part_gradient(d) == pytest.approx(fd, abs=1e-6)


class TestBackground:
    """u0 = -4 pi sum alpha_i G(., p_i) on the grid"""

    def test_grid_mean_removed(self, grid64):
        cfg = VortexConfiguration(points=[(0.3, 0.4), (0.71, 0.2)], multiplicities=[1, 2], epsilon=0.1)
        bg = build_background(cfg, grid64)
        assert abs(integrate(bg.u0)) < 1e-12
        assert np.all(bg.exp_u0.values > 0)

    def test_coincident_grid_point(self, grid64):
        cfg = VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.1)
        bg = build_background(cfg, grid64)
        assert bg.exp_u0.values[32, 32] == 0.0
        assert np.isfinite(bg.u0.values[32, 32])

    def test_evaluate_matches_green(self, grid64):
        cfg = VortexConfiguration(points=[(0.3, 0.4), (0.71, 0.2)], multiplicities=[1, 2], epsilon=0.1)
        bg = build_background(cfg, grid64)
        x = np.array([0.55, 0.81])
        expected = -4 * np.pi * (green(x, (0.3, 0.4)) + 2 * green(x, (0.71, 0.2)))
        assert bg.evaluate([x])[0] + bg.offset == pytest.approx(expected, abs=1e-9)
        assert bg.evaluate_exp([x])[0] == pytest.approx(np.exp(bg.evaluate([x])[0]), rel=1e-9)

    def test_evaluate_at_vortex(self, grid64):
        cfg = VortexConfiguration(points=[(0.3, 0.4)], epsilon=0.1)
        bg = build_background(cfg, grid64)
        assert bg.evaluate([(0.3, 0.4)])[0] == -np.inf
        assert bg.evaluate_exp([(0.3, 0.4)])[0] == 0.0

    def test_regular_gradients_antisymmetric(self, grid64):
        cfg = VortexConfiguration(points=[(0.3, 0.4), (0.6, 0.55)], epsilon=0.1)
        bg = build_background(cfg, grid64)
        assert bg.regular_gradients[0] == pytest.approx(-bg.regular_gradients[1], abs=1e-9)
        expected = -4 * np.pi * green_gradient(np.array([0.3, 0.4]) - np.array([0.6, 0.55]))
        assert bg.regular_gradients[0] == pytest.approx(expected)

    def test_no_vortices(self, grid64):
        bg = build_background(VortexConfiguration(points=[], epsilon=0.1), grid64)
        assert bg.N == 0
        assert np.all(bg.u0.values == 0)
        assert np.all(bg.exp_u0.values == 1)

    def test_coincident_vortices_rejected(self, grid64):
        cfg = VortexConfiguration(points=[(0.1, 0.1), (1.1, 0.1)], epsilon=0.1)
        with pytest.raises(VortexOnVortex):
            build_background(cfg, grid64)


class TestClusters:
    """Partition by |p_i - p_j| / eps"""

    def test_partition(self):
        cfg = VortexConfiguration(points=[(0.5, 0.5), (0.5, 0.52), (0.1, 0.1)], epsilon=0.01)
        partition = classify_clusters(cfg)
        assert partition.clusters == [[0, 1], [2]]
        assert partition.velocities[(0, 1)] == pytest.approx(2.0)

    def test_transitive(self):
        cfg = VortexConfiguration(points=[(0.5, 0.5), (0.5, 0.58), (0.5, 0.66)], epsilon=0.01)
        assert classify_clusters(cfg).clusters == [[0, 1, 2]]

    def test_distance_and_mask(self):
        grid = Grid(n=32)
        cfg = VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.1)
        dist = distance_to_vortices(cfg, grid)
        assert dist[16, 16] == 0.0
        assert dist[0, 0] == pytest.approx(np.sqrt(0.5))
        assert core_mask(cfg, grid, 0.1).sum() > 0
        empty = distance_to_vortices(VortexConfiguration(points=[], epsilon=0.1), grid)
        assert np.all(np.isinf(empty))
