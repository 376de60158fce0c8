"""
Periodic scalar fields on the unit torus with spectral operators
"""
import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import fft as sfft

from config import Config
from errors import MeanNotZero

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class Grid(BaseModel):
    """Uniform n x n periodic grid over the unit torus (|Omega| = 1)"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    n: int

    @field_validator('n')
    @classmethod
    def _even_and_resolvable(cls, value):
        if value < Config.MIN_GRID_POINTS:
            raise ValueError(f"n must be >= {Config.MIN_GRID_POINTS}, got {value}")
        if value % 2:
            raise ValueError(f"n must be even, got {value}")
        return value

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def coordinates(self):
        """Sample coordinates (x1, x2), value (i, j) sits at (i*h, j*h)"""
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, indexing='ij')


@lru_cache(maxsize=32)
def _wavenumbers(n):
    k = np.fft.fftfreq(n, d=1.0 / n)
    k.flags.writeable = False
    return k


@lru_cache(maxsize=32)
def _rfft_symbols(n):
    """|k|^2 and derivative wavenumbers on the rfft2 half plane"""
    k1 = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    k2 = np.fft.rfftfreq(n, d=1.0 / n)[None, :]
    k_squared = k1 ** 2 + k2 ** 2
    # The Nyquist mode has no odd derivative in a real interpolant
    d1 = np.where(np.abs(k1) == n // 2, 0.0, k1)
    d2 = np.where(np.abs(k2) == n // 2, 0.0, k2)
    for arr in (k_squared, d1, d2):
        arr.flags.writeable = False
    return k_squared, d1, d2


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a scalar function on a Grid"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if values.shape != (n, n):
            raise ValueError(f"Field values must have shape {(n, n)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Field values must be finite")
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full((grid.n, grid.n), float(value)))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample fn(x1, x2) on the grid coordinates"""
        x1, x2 = grid.coordinates()
        return cls(grid, fn(x1, x2))

    def mean(self) -> float:
        return float(self.values.mean())

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values):
        return Field(self.grid, values)

    def evaluate(self, points, derivative=(0, 0)):
        return evaluate_at(self, points, derivative)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a Field, c[0, 0] is the mean"""

    grid: Grid
    coefficients: np.ndarray

    def coefficient(self, k1, k2):
        """Coefficient of exp(2 pi i (k1 x1 + k2 x2)), k in [-n/2, n/2)"""
        n = self.grid.n
        return self.coefficients[k1 % n, k2 % n]


def same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"Fields live on different grids: n={grid.n} vs n={f.grid.n}")
    return grid


def to_spectral(f: Field) -> SpectralField:
    n = f.grid.n
    return SpectralField(f.grid, sfft.fft2(f.values) / n ** 2)


def from_spectral(s: SpectralField) -> Field:
    n = s.grid.n
    return Field(s.grid, np.real(sfft.ifft2(s.coefficients * n ** 2)))


def laplacian(f: Field) -> Field:
    """Spectral Laplacian with symbol -4 pi^2 |k|^2"""
    n = f.grid.n
    k_squared, _, _ = _rfft_symbols(n)
    spec = sfft.rfft2(f.values)
    return Field(f.grid, sfft.irfft2(-(TWO_PI ** 2) * k_squared * spec, s=(n, n)))


def solve_helmholtz(rhs: Field, kappa: float) -> Field:
    """
    Solve (Delta - kappa) v = rhs spectrally.

    Args:
        rhs: right-hand side on the torus grid
        kappa: nonnegative shift; for kappa = 0 the rhs must be mean-zero

    Returns:
        v, with the zero mode pinned to 0 when kappa = 0
    """
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    n = rhs.grid.n
    k_squared, _, _ = _rfft_symbols(n)
    spec = sfft.rfft2(rhs.values)
    symbol = -(TWO_PI ** 2) * k_squared - kappa
    if kappa == 0:
        mean = rhs.mean()
        if abs(mean) > Config.MEAN_ZERO_TOL:
            raise MeanNotZero(f"Poisson rhs has mean {mean:.3e}", {'mean': mean})
        symbol = symbol.copy()
        symbol[0, 0] = 1.0
        spec = spec.copy()
        spec[0, 0] = 0.0
    return Field(rhs.grid, sfft.irfft2(spec / symbol, s=(n, n)))


def integrate(f: Field) -> float:
    """h^2 times the sum of samples"""
    return float(f.grid.h ** 2 * np.sum(f.values))


def inner(f: Field, g: Field) -> float:
    same_grid(f, g)
    return float(f.grid.h ** 2 * np.sum(f.values * g.values))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(inner(f, f)))


def gradient(f: Field):
    """Spectral first derivatives (d/dx1, d/dx2)"""
    n = f.grid.n
    _, d1, d2 = _rfft_symbols(n)
    spec = sfft.rfft2(f.values)
    g1 = sfft.irfft2(1j * TWO_PI * d1 * spec, s=(n, n))
    g2 = sfft.irfft2(1j * TWO_PI * d2 * spec, s=(n, n))
    return Field(f.grid, g1), Field(f.grid, g2)


def _basis(x, n, order):
    """Rows of the real trigonometric interpolation basis at coordinates x"""
    k = _wavenumbers(n)
    x = np.asarray(x, dtype=float).ravel()
    phase = TWO_PI * np.outer(x, k)
    basis = np.exp(1j * phase) * (1j * TWO_PI * k) ** order
    nyquist = n // 2
    arg = np.pi * n * x
    if order == 0:
        basis[:, nyquist] = np.cos(arg)
    elif order == 1:
        basis[:, nyquist] = -np.pi * n * np.sin(arg)
    else:
        basis[:, nyquist] = -(np.pi * n) ** 2 * np.cos(arg)
    return basis


def evaluate_at(f: Field, points, derivative=(0, 0)):
    """
    Evaluate the trigonometric interpolant of f (or a derivative) at points.

    Args:
        f: field on the torus grid
        points: array of shape (m, 2), any real coordinates (periodic)
        derivative: derivative orders (a1, a2), each 0, 1 or 2

    Returns:
        array of m values
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    coeffs = to_spectral(f).coefficients
    b1 = _basis(pts[:, 0], f.grid.n, derivative[0])
    b2 = _basis(pts[:, 1], f.grid.n, derivative[1])
    return np.real(np.sum((b1 @ coeffs) * b2, axis=1))


def sample_tensor(f: Field, x1s, x2s, derivative=(0, 0)):
    """Interpolant of f on the tensor grid x1s x x2s, shape (len(x1s), len(x2s))"""
    coeffs = to_spectral(f).coefficients
    b1 = _basis(x1s, f.grid.n, derivative[0])
    b2 = _basis(x2s, f.grid.n, derivative[1])
    return np.real(b1 @ coeffs @ b2.T)


def band_limited_noise(grid, kmax=8, amplitude=1.0, rng=None):
    """Smooth random field with modes |k| <= kmax, scaled to sup norm `amplitude`"""
    rng = rng if rng is not None else np.random.default_rng()
    n = grid.n
    k = _wavenumbers(n)
    mask = (k[:, None] ** 2 + k[None, :] ** 2) <= kmax ** 2
    coeffs = np.zeros((n, n), dtype=complex)
    count = int(mask.sum())
    coeffs[mask] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    values = np.real(sfft.ifft2(coeffs))
    peak = np.max(np.abs(values))
    if peak == 0:
        return Field.zeros(grid)
    return Field(grid, values * (amplitude / peak))


def check_resolution(grid: Grid, epsilon: float) -> bool:
    """Advisory h <= eps/8; logs a warning and returns False when violated"""
    ok = grid.h <= epsilon / Config.CELLS_PER_CORE
    if not ok:
        logger.warning(
            f"Grid n={grid.n} under-resolves eps={epsilon}: h={grid.h:.3e} > eps/{Config.CELLS_PER_CORE}"
        )
    return ok


def save_field(stem, field: Field, label='', epsilon=0.0, **metadata):
    """
    Write a field dump: <stem>.json sidecar plus <stem>.bin raw little-endian float64.

    Returns:
        (json_path, bin_path)
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    meta = {'n': field.grid.n, 'label': label, 'epsilon': float(epsilon)}
    meta.update(metadata)
    json_path = stem.with_suffix('.json')
    bin_path = stem.with_suffix('.bin')
    with open(json_path, 'w', encoding='utf-8') as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    np.ascontiguousarray(field.values, dtype='<f8').tofile(bin_path)
    logger.debug(f"Saved field '{label}' to {bin_path}")
    return json_path, bin_path


def load_field(stem):
    """Read a field dump written by save_field; returns (Field, metadata)"""
    stem = Path(stem)
    with open(stem.with_suffix('.json'), 'r', encoding='utf-8') as fh:
        meta = json.load(fh)
    n = int(meta['n'])
    values = np.fromfile(stem.with_suffix('.bin'), dtype='<f8')
    if values.size != n * n:
        raise ValueError(f"Field dump {stem} holds {values.size} values, expected {n * n}")
    return Field(Grid(n=n), values.reshape(n, n)), meta
