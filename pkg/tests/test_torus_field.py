"""
Tests for periodic fields and spectral operators on the unit torus
"""
import json

import numpy as np
import pytest
from pydantic import ValidationError

from errors import MeanNotZero
from torus_field import (Field, Grid, band_limited_noise, check_resolution, evaluate_at, from_spectral, gradient,
                         inner, integrate, l2_norm, laplacian, load_field, sample_tensor, save_field,
                         solve_helmholtz, to_spectral)

TWO_PI = 2.0 * np.pi


def trig(x1, x2):
    return np.sin(TWO_PI * x1) * np.cos(2 * TWO_PI * x2) + 0.3 * np.cos(TWO_PI * (3 * x1 - x2))


class TestGrid:
    """Grid validation"""

    def test_spacing(self):
        grid = Grid(n=64)
        assert grid.h == pytest.approx(1 / 64)
        x1, x2 = grid.coordinates()
        assert x1[3, 5] == pytest.approx(3 / 64)
        assert x2[3, 5] == pytest.approx(5 / 64)

    def test_rejects_odd(self):
        with pytest.raises(ValidationError, match="even"):
            Grid(n=65)

    def test_rejects_too_small(self):
        with pytest.raises(ValidationError):
            Grid(n=8)

    def test_frozen(self):
        grid = Grid(n=32)
        with pytest.raises(ValidationError):
            grid.n = 64


class TestField:
    """Field container"""

    def test_shape_checked(self, grid64):
        with pytest.raises(ValueError, match="shape"):
            Field(grid64, np.zeros((32, 32)))

    def test_non_finite_rejected(self, grid64):
        values = np.zeros((64, 64))
        values[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Field(grid64, values)

    def test_constant_mean_sup(self, grid64):
        f = Field.constant(grid64, -2.5)
        assert f.mean() == pytest.approx(-2.5)
        assert f.sup() == pytest.approx(2.5)
        assert integrate(f) == pytest.approx(-2.5)


class TestSpectralOperators:
    """FFT round trip, Laplacian, Helmholtz and gradients"""

    def test_round_trip(self, grid64, rng):
        f = Field(grid64, rng.standard_normal((64, 64)))
        back = from_spectral(to_spectral(f))
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_coefficient_lookup(self, grid64):
        f = Field.from_function(grid64, lambda x1, x2: np.cos(TWO_PI * x1))
        spec = to_spectral(f)
        assert spec.coefficient(1, 0).real == pytest.approx(0.5)
        assert spec.coefficient(-1, 0).real == pytest.approx(0.5)
        assert abs(spec.coefficient(0, 0)) < 1e-14

    def test_laplacian_of_trig_polynomial(self, grid64):
        f = Field.from_function(grid64, lambda x1, x2: np.sin(TWO_PI * x1) * np.cos(2 * TWO_PI * x2))
        expected = -(TWO_PI ** 2) * 5 * f.values
        assert np.max(np.abs(laplacian(f).values - expected)) < 1e-9

    def test_helmholtz_inverts(self, grid64):
        v = Field.from_function(grid64, trig)
        kappa = 7.0
        rhs = Field(grid64, laplacian(v).values - kappa * v.values)
        solved = solve_helmholtz(rhs, kappa)
        assert np.max(np.abs(solved.values - v.values)) < 1e-12

    def test_poisson_pins_zero_mode(self, grid64):
        v = Field.from_function(grid64, trig)
        solved = solve_helmholtz(laplacian(v), 0.0)
        assert abs(solved.mean()) < 1e-14
        assert np.max(np.abs(solved.values - v.values)) < 1e-12

    def test_poisson_needs_mean_zero(self, grid64):
        with pytest.raises(MeanNotZero):
            solve_helmholtz(Field.constant(grid64, 1.0), 0.0)

    def test_negative_kappa_rejected(self, grid64):
        with pytest.raises(ValueError, match="nonnegative"):
            solve_helmholtz(Field.zeros(grid64), -1.0)

    def test_gradient(self, grid64):
        f = Field.from_function(grid64, lambda x1, x2: np.sin(TWO_PI * x1) + np.cos(3 * TWO_PI * x2))
        g1, g2 = gradient(f)
        x1, x2 = grid64.coordinates()
        assert np.max(np.abs(g1.values - TWO_PI * np.cos(TWO_PI * x1))) < 1e-10
        assert np.max(np.abs(g2.values + 3 * TWO_PI * np.sin(3 * TWO_PI * x2))) < 1e-9

    def test_inner_and_norm(self, grid64):
        f = Field.from_function(grid64, lambda x1, x2: np.sin(TWO_PI * x1))
        assert inner(f, f) == pytest.approx(0.5)
        assert l2_norm(f) == pytest.approx(np.sqrt(0.5))

    def test_mixed_grids_rejected(self, grid64):
        with pytest.raises(ValueError, match="different grids"):
            inner(Field.zeros(grid64), Field.zeros(Grid(n=32)))


class TestOffGridEvaluation:
    """Trigonometric interpolation at arbitrary points"""

    def test_values_and_derivatives(self, grid64, rng):
        f = Field.from_function(grid64, trig)
        pts = rng.uniform(-1.0, 2.0, size=(20, 2))
        assert np.max(np.abs(evaluate_at(f, pts) - trig(pts[:, 0], pts[:, 1]))) < 1e-12
        dx = TWO_PI * np.cos(TWO_PI * pts[:, 0]) * np.cos(2 * TWO_PI * pts[:, 1]) \
            - 0.3 * 3 * TWO_PI * np.sin(TWO_PI * (3 * pts[:, 0] - pts[:, 1]))
        assert np.max(np.abs(evaluate_at(f, pts, (1, 0)) - dx)) < 1e-10

    def test_tensor_matches_points(self, grid64):
        f = Field.from_function(grid64, trig)
        x1s = np.linspace(0.1, 0.9, 7)
        x2s = np.linspace(0.05, 0.6, 5)
        X1, X2 = np.meshgrid(x1s, x2s, indexing='ij')
        tensor = sample_tensor(f, x1s, x2s)
        pointwise = evaluate_at(f, np.stack([X1.ravel(), X2.ravel()], axis=1)).reshape(X1.shape)
        assert np.max(np.abs(tensor - pointwise)) < 1e-12

    def test_field_method_delegates(self, grid64):
        f = Field.from_function(grid64, trig)
        assert f.evaluate([[0.25, 0.5]])[0] == pytest.approx(trig(0.25, 0.5))


class TestNoiseAndResolution:
    """Band-limited perturbations and the resolution advisory"""

    def test_noise_amplitude_and_determinism(self, grid64):
        a = band_limited_noise(grid64, kmax=8, amplitude=0.5, rng=np.random.default_rng([0, 1]))
        b = band_limited_noise(grid64, kmax=8, amplitude=0.5, rng=np.random.default_rng([0, 1]))
        assert a.sup() == pytest.approx(0.5)
        assert np.array_equal(a.values, b.values)

    def test_noise_band_limit(self, grid64):
        noise = band_limited_noise(grid64, kmax=4, amplitude=1.0, rng=np.random.default_rng(3))
        coeffs = np.abs(to_spectral(noise).coefficients)
        k = np.fft.fftfreq(64, d=1 / 64)
        outside = (k[:, None] ** 2 + k[None, :] ** 2) > 16
        assert coeffs[outside].max() < 1e-12

    def test_resolution_advisory(self, caplog):
        assert check_resolution(Grid(n=512), 0.02)
        assert not check_resolution(Grid(n=64), 0.02)
        assert 'under-resolves' in caplog.text


class TestFieldDump:
    """Binary field dumps with JSON sidecars"""

    def test_round_trip(self, tmp_path, grid64, rng):
        f = Field(grid64, rng.standard_normal((64, 64)))
        json_path, bin_path = save_field(tmp_path / 'u', f, label='u', epsilon=0.02, solver='monotone')
        assert bin_path.stat().st_size == 64 * 64 * 8
        with open(json_path) as fh:
            meta = json.load(fh)
        assert meta == {'n': 64, 'label': 'u', 'epsilon': 0.02, 'solver': 'monotone'}
        loaded, meta = load_field(tmp_path / 'u')
        assert np.array_equal(loaded.values, f.values)

    def test_size_mismatch(self, tmp_path, grid64):
        save_field(tmp_path / 'u', Field.zeros(grid64))
        with open(tmp_path / 'u.json', 'w') as fh:
            json.dump({'n': 32, 'label': '', 'epsilon': 0.0}, fh)
        with pytest.raises(ValueError, match="expected"):
            load_field(tmp_path / 'u')
