"""
Checks on converged torus solutions: flux quantization, the local Pohozaev
identity, decay outside the vortex cores and a multi-start uniqueness check
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from config import Config
from errors import ClusterNotIsolated, SolveFailed
from monotone_solver import (MonotoneSettings, SolveReport, critical_epsilon_bound, maximal_solve,
                             nonlinearity)
from newton_solver import LinearizedOperator, NewtonSettings, newton_solve, smallest_eigenvalue
from torus_field import Field, band_limited_noise, integrate
from vortex_background import (TorusBackground, VortexConfiguration, classify_clusters, distance_to_vortices,
                               min_image, torus_distance)

logger = logging.getLogger(__name__)


def _exp_u(report: SolveReport, bg: TorusBackground) -> np.ndarray:
    """e^u with exact zeros at grid-coincident vortices"""
    return bg.exp_u0.values * np.exp(report.v.values)


def flux(report: SolveReport, bg: TorusBackground = None, eps: float = None) -> float:
    """eps^-2 integral of e^u (1 - e^u); 4 pi N for a solution"""
    bg = bg or report.background
    eps = eps or report.epsilon
    E = _exp_u(report, bg)
    return integrate(Field(bg.grid, nonlinearity(E, eps)))


def localized_flux_fraction(report: SolveReport, radius_factor: float = Config.CORE_RADIUS_FACTOR,
                            bg: TorusBackground = None) -> float:
    """Share of the flux carried inside the union of B_{R eps}(p_i)"""
    bg = bg or report.background
    eps = report.epsilon
    total = flux(report, bg, eps)
    if total == 0:
        return 1.0
    inside = distance_to_vortices(bg.cfg, bg.grid) < radius_factor * eps
    density = nonlinearity(_exp_u(report, bg), eps)
    return float(bg.grid.h ** 2 * np.sum(density[inside]) / total)


def existence_check(cfg: VortexConfiguration) -> dict:
    """Compare eps against the necessary bound 1/sqrt(16 pi N)"""
    bound = critical_epsilon_bound(cfg.N)
    return {
        'N': cfg.N,
        'epsilon': cfg.epsilon,
        'critical_epsilon': bound,
        'above_bound': bool(cfg.epsilon > bound),
    }


@dataclass
class PohozaevResult:
    """Both sides of the local Pohozaev identity around one cluster"""

    lhs: float
    rhs: float
    gap: float
    epsilon: float
    l: int
    separation: float
    radius_factor: float
    gradient_term: float

    def to_row(self) -> dict:
        return asdict(self)


def _ball_weights(grid, center, radius, subsample):
    """Fraction of each grid cell inside the ball; boundary cells are subsampled"""
    n, h = grid.n, grid.h
    x1, x2 = grid.coordinates()
    d = min_image(np.stack([x1 - center[0], x2 - center[1]], axis=-1))
    r = np.hypot(d[..., 0], d[..., 1])
    half_diag = h / np.sqrt(2.0)
    weights = (r + half_diag <= radius).astype(float)
    boundary = np.abs(r - radius) < half_diag
    offsets = (np.arange(subsample) + 0.5) / subsample - 0.5
    o1, o2 = np.meshgrid(offsets * h, offsets * h, indexing='ij')
    bd = d[boundary]
    inside = np.hypot(bd[:, 0, None, None] + o1, bd[:, 1, None, None] + o2) <= radius
    weights[boundary] = inside.reshape(len(bd), -1).mean(axis=1)
    return weights


def _cluster_gradient(report, bg, cluster, i):
    """grad v(p_i) for v = u - 2 sum_{j in cluster} alpha_j ln|x - p_j|"""
    pos = bg.cfg.positions
    alphas = bg.cfg.alphas
    grad = report.gradient_v(pos[i])[0] + bg.regular_gradients[i]
    for j in cluster:
        if j == i:
            continue
        d = min_image(pos[i] - pos[j])
        grad = grad - 2.0 * alphas[j] * d / np.sum(d ** 2)
    return grad


def pohozaev(report: SolveReport, bg: TorusBackground = None, eps: float = None,
             ball_radius_factor: float = Config.POHOZAEV_RADIUS_FACTOR, cluster: int = 0) -> PohozaevResult:
    """
    eps^-2 int_B (1 - e^u)^2 against 4 pi l^2 + 4 pi sum alpha_i (p_i - q) . grad v(p_i).

    Args:
        report: converged torus solution
        ball_radius_factor: r~, the ball is B_{r~ eps}(q) with q the cluster's first vortex
        cluster: index into classify_clusters(cfg).clusters

    Raises:
        ClusterNotIsolated: the ball holds vortices of another cluster or misses one of its own
    """
    bg = bg or report.background
    eps = eps or report.epsilon
    cfg = bg.cfg
    partition = classify_clusters(cfg)
    members = partition.clusters[cluster]
    pos = cfg.positions
    q = pos[members[0]]
    radius = ball_radius_factor * eps
    if radius >= 0.5:
        raise ClusterNotIsolated(f"ball radius {radius:.3g} does not fit in the torus", {'radius': radius})
    for j in range(len(pos)):
        dist = float(torus_distance(pos[j], q))
        if j in members and dist >= radius:
            raise ClusterNotIsolated(f"cluster member {j} lies outside the ball of radius {radius:.3g}",
                                     {'member': j, 'distance': dist})
        if j not in members and dist < radius:
            raise ClusterNotIsolated(f"vortex {j} of another cluster lies inside the ball of radius {radius:.3g}",
                                     {'vortex': j, 'distance': dist})

    weights = _ball_weights(bg.grid, q, radius, Config.POHOZAEV_SUBSAMPLE)
    E = _exp_u(report, bg)
    lhs = float(bg.grid.h ** 2 * np.sum(weights * (1.0 - E) ** 2) / eps ** 2)

    l = int(sum(cfg.multiplicities[j] for j in members))
    gradient_term = 0.0
    for i in members:
        offset = min_image(pos[i] - q)
        gradient_term += cfg.alphas[i] * float(np.dot(offset, _cluster_gradient(report, bg, members, i)))
    rhs = 4.0 * np.pi * l ** 2 + 4.0 * np.pi * gradient_term
    gap = abs(lhs - rhs) / abs(rhs)
    separation = max((float(torus_distance(pos[a], pos[b])) for a in members for b in members if a < b), default=0.0)
    logger.info(f"Pohozaev l={l}, eps={eps}, r~={ball_radius_factor}: lhs={lhs:.6g} rhs={rhs:.6g} gap={gap:.3e}")
    return PohozaevResult(lhs, rhs, gap, eps, l, separation, ball_radius_factor, 4.0 * np.pi * gradient_term)


def exterior_decay(report: SolveReport, eps: float = None, radii=(2, 4, 6, 8, 10, 12),
                   bg: TorusBackground = None) -> dict:
    """
    sup|u| outside the union of B_{R eps}(p_i) for each R, an exponential
    rate fit and a super-polynomial check (log sup|u| concave in log R).
    """
    bg = bg or report.background
    eps = eps or report.epsilon
    dist = distance_to_vortices(bg.cfg, bg.grid)
    u = np.abs(report.u.values)
    rows = []
    for R in radii:
        outside = dist >= R * eps
        rows.append({'R': float(R), 'sup_u': float(u[outside].max()) if outside.any() else 0.0})
    usable = [row for row in rows if row['sup_u'] > 0]
    result = {'rows': rows, 'rate': None, 'decreasing': True, 'super_polynomial': None}
    if len(usable) >= 2:
        R = np.array([row['R'] for row in usable])
        s = np.log([row['sup_u'] for row in usable])
        result['decreasing'] = bool(np.all(np.diff(s) < 0))
        result['rate'] = float(-np.polyfit(R, s, 1)[0])
    if len(usable) >= 3:
        t = np.log(R)
        slopes = np.diff(s) / np.diff(t)
        result['super_polynomial'] = bool(np.all(np.diff(slopes) <= 1e-9))
    return result


def exterior_mass(report: SolveReport, radius_factors=(2, 5, 10, 20), bg: TorusBackground = None) -> dict:
    """eps^-2 int of (1 - e^u)^2 outside the union of B_{r~ eps}(p_i), per r~"""
    bg = bg or report.background
    eps = report.epsilon
    dist = distance_to_vortices(bg.cfg, bg.grid)
    density = (1.0 - _exp_u(report, bg)) ** 2 / eps ** 2
    rows = []
    for factor in radius_factors:
        outside = dist >= factor * eps
        rows.append({'radius_factor': float(factor), 'mass': float(bg.grid.h ** 2 * np.sum(density[outside]))})
    masses = [row['mass'] for row in rows]
    return {'rows': rows, 'monotone': all(b <= a for a, b in zip(masses, masses[1:]))}


class Verdict(str, Enum):
    UNIQUE = 'Unique'
    MULTIPLE = 'MultipleFound'
    INCONCLUSIVE = 'Inconclusive'


@dataclass
class ProbeResult:
    """Outcome of Newton restarts around the maximal solution"""

    verdict: Verdict
    trials: List[dict]
    lambda_min: Optional[float]
    max_deviation: float
    reference: SolveReport = field(repr=False, default=None)

    def summary(self) -> dict:
        return {
            'verdict': self.verdict.value,
            'lambda_min': self.lambda_min,
            'max_deviation': self.max_deviation,
            'converged_trials': sum(1 for t in self.trials if t['converged']),
            'trials': len(self.trials),
        }


def uniqueness_probe(cfg: VortexConfiguration, bg: TorusBackground, eps: float = None, trials: int = 5,
                     seed: int = Config.DEFAULT_SEED, monotone: MonotoneSettings = None,
                     newton: NewtonSettings = None, workers: int = None) -> ProbeResult:
    """
    Newton restarts from the maximal solution and from seeded smooth perturbations of it.

    Args:
        cfg: vortex configuration
        bg: its background on the working grid
        trials: number of perturbed starts (>= 2), run in parallel and merged by index
        seed: trial t draws its perturbation from default_rng([seed, t])

    Returns:
        ProbeResult; failed trials are reported, never raised
    """
    if trials < 2:
        raise ValueError(f"uniqueness check needs at least 2 trials, got {trials}")
    eps = eps or cfg.epsilon
    reference = maximal_solve(cfg, bg, monotone)
    grid = bg.grid

    def run_trial(t):
        if t == 0:
            start = reference.v
        else:
            noise = band_limited_noise(grid, Config.UNIQUENESS_KMAX, Config.UNIQUENESS_AMPLITUDE,
                                       np.random.default_rng([seed, t]))
            start = Field(grid, reference.v.values + noise.values)
        try:
            report = newton_solve(start, bg, eps, newton)
        except SolveFailed as e:
            logger.warning(f"uniqueness trial {t} failed: {e}")
            return {'trial': t, 'perturbed': t > 0, 'converged': False, 'deviation': None, 'error': str(e)}
        deviation = float(np.max(np.abs(report.v.values - reference.v.values)))
        return {'trial': t, 'perturbed': t > 0, 'converged': True, 'deviation': deviation,
                'newton_steps': report.diagnostics['newton_steps'], 'error': None}

    with ThreadPoolExecutor(max_workers=workers or Config.WORKERS) as pool:
        rows = list(pool.map(run_trial, range(trials + 1)))

    converged = [row for row in rows if row['converged']]
    max_dev = max((row['deviation'] for row in converged), default=float('nan'))
    if not converged:
        verdict = Verdict.INCONCLUSIVE
    elif max_dev <= Config.UNIQUENESS_TOL:
        verdict = Verdict.UNIQUE
    else:
        verdict = Verdict.MULTIPLE

    try:
        lam, _ = smallest_eigenvalue(LinearizedOperator.at_solution(reference.v, bg, eps))
    except SolveFailed as e:
        logger.warning(f"eigenvalue computation failed: {e}")
        lam = None
    logger.info(f"Uniqueness check: {verdict.value}, {len(converged)}/{len(rows)} converged, "
                f"max deviation {max_dev:.3e}, lambda_min={lam}")
    return ProbeResult(verdict, rows, lam, float(max_dev), reference)
