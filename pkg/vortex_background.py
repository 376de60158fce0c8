"""
Vortex configurations, cluster structure, torus Green function and the
singular background u0 = -4 pi sum_i alpha_i G(., p_i)
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat, field_validator, model_validator
from scipy.special import exp1

from config import Config
from errors import DiagonalPoint, VortexOnVortex
from torus_field import Field, Grid, check_resolution, integrate

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
# Cell average of ln|x| over the square [-a, a]^2 is ln(a) + LOG_CELL_OFFSET
LOG_CELL_OFFSET = 0.5 * (np.log(2.0) + 0.5 * np.pi - 3.0)


class VortexConfiguration(BaseModel):
    """Vortex positions on the torus with multiplicities and coupling eps"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    points: List[Tuple[float, float]] = []
    multiplicities: Optional[List[int]] = None
    epsilon: PositiveFloat

    @field_validator('points')
    @classmethod
    def _reduce_mod_one(cls, value):
        return [(float(x) % 1.0, float(y) % 1.0) for x, y in value]

    @model_validator(mode='before')
    @classmethod
    def _default_multiplicities(cls, data):
        if isinstance(data, dict) and data.get('multiplicities') is None:
            data = dict(data)
            data['multiplicities'] = [1] * len(data.get('points', []))
        return data

    @model_validator(mode='after')
    def _check_multiplicities(self):
        if len(self.multiplicities) != len(self.points):
            raise ValueError("multiplicities and points differ in length")
        if any(m < 1 for m in self.multiplicities):
            raise ValueError("multiplicities must be positive integers")
        return self

    @classmethod
    def from_records(cls, records, epsilon):
        """Build from [{x, y, multiplicity}] records as found in experiment files"""
        points = [(r['x'], r['y']) for r in records]
        mults = [int(r.get('multiplicity', 1)) for r in records]
        return cls(points=points, multiplicities=mults, epsilon=epsilon)

    @property
    def N(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def positions(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(-1, 2)

    @property
    def alphas(self) -> np.ndarray:
        return np.asarray(self.multiplicities, dtype=float)

    def with_epsilon(self, epsilon):
        return VortexConfiguration(points=self.points, multiplicities=self.multiplicities, epsilon=epsilon)


@dataclass
class ClusterPartition:
    """Disjoint clusters A_k covering all vortex indices"""

    clusters: List[List[int]]
    velocities: dict = field(default_factory=dict)
    threshold: float = Config.CLUSTER_THRESHOLD


def min_image(d):
    """Reduce displacement vectors into [-1/2, 1/2)^2"""
    d = np.asarray(d, dtype=float)
    return d - np.round(d)


def torus_distance(a, b):
    d = min_image(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return np.sqrt(np.sum(d ** 2, axis=-1))


@lru_cache(maxsize=8)
def _images(count):
    m = np.arange(-count, count + 1)
    grid = np.stack(np.meshgrid(m, m, indexing='ij'), axis=-1).reshape(-1, 2).astype(float)
    nonzero = np.any(grid != 0, axis=1)
    return grid[nonzero]


@lru_cache(maxsize=8)
def _fourier_half_plane(k_max):
    k = np.arange(-k_max, k_max + 1)
    kk = np.stack(np.meshgrid(k, k, indexing='ij'), axis=-1).reshape(-1, 2).astype(float)
    upper = (kk[:, 0] > 0) | ((kk[:, 0] == 0) & (kk[:, 1] > 0))
    kk = kk[upper]
    k_sq = np.sum(kk ** 2, axis=1)
    weight = 2.0 * np.exp(-4.0 * np.pi ** 2 * k_sq * Config.EWALD_TAU) / (4.0 * np.pi ** 2 * k_sq)
    return kk, weight


def _ein(a):
    """Entire exponential integral Ein(a) = E1(a) + ln a + Euler gamma"""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = a < 1e-3
    s = a[small]
    out[small] = s - s ** 2 / 4.0 + s ** 3 / 18.0 - s ** 4 / 96.0
    big = ~small
    out[big] = exp1(a[big]) + np.log(a[big]) + EULER_GAMMA
    return out


def _smooth_part(d):
    """Image and Fourier sums of the heat-kernel split, shared by G and gamma"""
    tau = Config.EWALD_TAU
    total = np.full(d.shape[:-1], -tau)
    for m in _images(Config.EWALD_IMAGES):
        z = d + m
        total += exp1(np.sum(z ** 2, axis=-1) / (4.0 * tau)) / (4.0 * np.pi)
    kk, weight = _fourier_half_plane(Config.EWALD_FOURIER_MAX)
    for k, w in zip(kk, weight):
        total += w * np.cos(2.0 * np.pi * (d @ k))
    return total


def _smooth_part_gradient(d):
    tau = Config.EWALD_TAU
    grad = np.zeros(d.shape)
    for m in _images(Config.EWALD_IMAGES):
        z = d + m
        r2 = np.sum(z ** 2, axis=-1)
        grad += np.asarray(-np.exp(-r2 / (4.0 * tau)) / (2.0 * np.pi * r2))[..., None] * z
    kk, weight = _fourier_half_plane(Config.EWALD_FOURIER_MAX)
    for k, w in zip(kk, weight):
        grad -= np.asarray(w * 2.0 * np.pi * np.sin(2.0 * np.pi * (d @ k)))[..., None] * k
    return grad


def regular_part(d):
    """
    Regular part gamma(d) = G(d) + ln|d|/(2 pi) with |d| the torus distance.

    Args:
        d: displacement(s) x - y, shape (..., 2)

    Returns:
        gamma values, smooth in d near 0
    """
    d = min_image(d)
    tau = Config.EWALD_TAU
    a = np.sum(d ** 2, axis=-1) / (4.0 * tau)
    local = (_ein(a) - EULER_GAMMA + np.log(4.0 * tau)) / (4.0 * np.pi)
    return local + _smooth_part(d)


def regular_part_gradient(d):
    """Gradient of gamma with respect to x, finite at d = 0 (where it vanishes)"""
    d = min_image(d)
    tau = Config.EWALD_TAU
    a = np.sum(d ** 2, axis=-1) / (4.0 * tau)
    ratio = np.where(a < 1e-8, 1.0 - a / 2.0, -np.expm1(-a) / np.where(a < 1e-8, 1.0, a))
    local = np.asarray(ratio / (8.0 * np.pi * tau))[..., None] * d
    return local + _smooth_part_gradient(d)


def green_displacement(d):
    """G as a function of x - y (vectorized); singular where d = 0 mod 1"""
    d = min_image(d)
    r2 = np.sum(d ** 2, axis=-1)
    return exp1(r2 / (4.0 * Config.EWALD_TAU)) / (4.0 * np.pi) + _smooth_part(d)


def green_gradient(d):
    """grad_x G(x, y) at d = x - y, d != 0"""
    d = min_image(d)
    r2 = np.sum(d ** 2, axis=-1)
    coeff = -np.exp(-r2 / (4.0 * Config.EWALD_TAU)) / (2.0 * np.pi * r2)
    return np.asarray(coeff)[..., None] * d + _smooth_part_gradient(d)


def green(x, y) -> float:
    """Torus Green function: -Delta_x G = delta_y - 1, mean zero in x"""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if torus_distance(x, y) < Config.SINGULAR_DISTANCE:
        raise DiagonalPoint(f"green evaluated on the diagonal at {tuple(np.asarray(x))}")
    return float(green_displacement(d))


def green_tail_bound(k_max=None) -> float:
    """Size of the Fourier terms dropped beyond |k|_inf = k_max"""
    k_max = Config.EWALD_FOURIER_MAX if k_max is None else k_max
    total = 0.0
    for shell in range(k_max + 1, k_max + 40):
        k = np.arange(-shell, shell + 1)
        kk = np.stack(np.meshgrid(k, k, indexing='ij'), axis=-1).reshape(-1, 2)
        ring = kk[np.max(np.abs(kk), axis=1) == shell]
        k_sq = np.sum(ring ** 2, axis=1)
        total += np.sum(np.exp(-4.0 * np.pi ** 2 * k_sq * Config.EWALD_TAU) / (4.0 * np.pi ** 2 * k_sq))
    return float(total)


def green_lower_bound(n=128) -> float:
    """Observed C0 >= 0 with G(x, y) >= -C0, by a grid scan of G(., 0)"""
    x = np.arange(n) / n
    d = np.stack(np.meshgrid(x, x, indexing='ij'), axis=-1).reshape(-1, 2)[1:]
    return float(max(-np.min(green_displacement(d)), 0.0))


@dataclass(frozen=True, eq=False)
class TorusBackground:
    """Singular part u0 of u, its exponential and regular-part gradients at the vortices"""

    cfg: VortexConfiguration
    grid: Grid
    u0: Field
    exp_u0: Field
    regular_gradients: np.ndarray
    offset: float = 0.0

    @property
    def N(self) -> int:
        return self.cfg.N

    def evaluate(self, points):
        """u0 at arbitrary points (-inf at the vortices)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.full(len(pts), -self.offset)
        for p, alpha in zip(self.cfg.positions, self.cfg.alphas):
            d = min_image(pts - p)
            r2 = np.sum(d ** 2, axis=-1)
            with np.errstate(divide='ignore'):
                total += alpha * (np.log(r2) - 4.0 * np.pi * regular_part(d))
        return total

    def evaluate_exp(self, points):
        """e^{u0} at arbitrary points, exactly 0 at the vortices"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.full(len(pts), np.exp(-self.offset))
        for p, alpha in zip(self.cfg.positions, self.cfg.alphas):
            d = min_image(pts - p)
            r2 = np.sum(d ** 2, axis=-1)
            total *= r2 ** alpha * np.exp(-4.0 * np.pi * alpha * regular_part(d))
        return total


def _check_distinct(cfg):
    pos = cfg.positions
    for i in range(len(pos)):
        for j in range(i + 1, len(pos)):
            if torus_distance(pos[i], pos[j]) < Config.SINGULAR_DISTANCE:
                raise VortexOnVortex(
                    f"vortices {i} and {j} coincide at {tuple(pos[i])}; merge their multiplicities",
                    {'indices': [i, j]},
                )


def build_background(cfg: VortexConfiguration, grid: Grid) -> TorusBackground:
    """
    Sample u0 = -4 pi sum alpha_i G(., p_i) and exp(u0) on the grid.

    The log singularity is exponentiated analytically, so exp_u0 carries
    the factor r^{2 alpha} and vanishes at grid-coincident vortices. At those
    points u0 takes the cell average of the log instead of -inf. The O(h^2)
    quadrature mean of the sampled u0 is removed from both fields and kept
    in `offset`.
    """
    _check_distinct(cfg)
    check_resolution(grid, cfg.epsilon)
    n = grid.n
    x1, x2 = grid.coordinates()
    X = np.stack([x1, x2], axis=-1)
    u0 = np.zeros((n, n))
    zero_mask = np.zeros((n, n), dtype=bool)
    cell_log = np.log(grid.h / 2.0) + LOG_CELL_OFFSET

    for p, alpha in zip(cfg.positions, cfg.alphas):
        d = min_image(X - p)
        r2 = np.sum(d ** 2, axis=-1)
        gamma = regular_part(d)
        singular = r2 < Config.SINGULAR_DISTANCE ** 2
        log_r = np.where(singular, cell_log, 0.5 * np.log(np.where(singular, 1.0, r2)))
        u0 += alpha * (2.0 * log_r - 4.0 * np.pi * gamma)
        zero_mask |= singular

    offset = integrate(Field(grid, u0)) if cfg.N else 0.0
    u0 -= offset
    exp_u0 = np.exp(u0)
    exp_u0[zero_mask] = 0.0

    grads = np.zeros((len(cfg.points), 2))
    pos = cfg.positions
    for i in range(len(pos)):
        for j in range(len(pos)):
            if i != j:
                grads[i] -= 4.0 * np.pi * cfg.alphas[j] * green_gradient(pos[i] - pos[j])

    logger.info(f"Built background: N={cfg.N}, n={n}, eps={cfg.epsilon}, quadrature offset={offset:.3e}")
    return TorusBackground(cfg, grid, Field(grid, u0), Field(grid, exp_u0), grads, offset)


def classify_clusters(cfg: VortexConfiguration, threshold: float = Config.CLUSTER_THRESHOLD) -> ClusterPartition:
    """Transitive closure of |p_i - p_j| / eps <= threshold (union-find)"""
    count = len(cfg.points)
    parent = list(range(count))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    pos = cfg.positions
    ratios = {}
    for i in range(count):
        for j in range(i + 1, count):
            ratio = float(torus_distance(pos[i], pos[j])) / cfg.epsilon
            ratios[(i, j)] = ratio
            if ratio <= threshold:
                parent[find(i)] = find(j)

    groups = {}
    for i in range(count):
        groups.setdefault(find(i), []).append(i)
    clusters = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])

    velocities = {}
    for members in clusters:
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                velocities[(members[a], members[b])] = ratios[(members[a], members[b])]
    return ClusterPartition(clusters, velocities, threshold)


def distance_to_vortices(cfg: VortexConfiguration, grid: Grid) -> np.ndarray:
    """Torus distance from each grid point to the nearest vortex (inf when N = 0)"""
    x1, x2 = grid.coordinates()
    X = np.stack([x1, x2], axis=-1)
    best = np.full((grid.n, grid.n), np.inf)
    for p in cfg.positions:
        best = np.minimum(best, torus_distance(X, p))
    return best


def core_mask(cfg: VortexConfiguration, grid: Grid, radius: float) -> np.ndarray:
    """Grid points inside the union of balls B_radius(p_i)"""
    return distance_to_vortices(cfg, grid) < radius
