"""
Monotone iteration for the maximal solution of the torus vortex equation,
with the explicit subsolution used as a verifiable floor
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat, PositiveInt

from config import Config
from errors import ConfigInvalid, NonExistenceSuspected, NonMonotoneStep, NotConverged, SubsolutionFailed
from perturbative import Cutoff
from torus_field import Field, Grid, evaluate_at, integrate, laplacian, sample_tensor, solve_helmholtz
from vortex_background import TorusBackground, VortexConfiguration, build_background, distance_to_vortices

logger = logging.getLogger(__name__)


class Classification(str, Enum):
    TOPOLOGICAL = 'Topological'
    NON_TOPOLOGICAL_SUSPECT = 'NonTopologicalSuspect'
    NOT_CONVERGED = 'NotConverged'


class MonotoneSettings(BaseModel):
    """Monotone scheme settings; kappa defaults to 4/eps^2"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    kappa: Optional[PositiveFloat] = None
    tol_sup: PositiveFloat = Config.MONOTONE_TOL_SUP
    max_iter: PositiveInt = Config.MONOTONE_MAX_ITER

    def resolve_kappa(self, epsilon):
        kappa = self.kappa if self.kappa is not None else Config.MONOTONE_KAPPA_FACTOR / epsilon ** 2
        floor = Config.MONOTONE_KAPPA_MIN_FACTOR / epsilon ** 2
        if kappa < floor:
            raise ConfigInvalid(
                f"kappa={kappa:.4g} below the order-preserving floor 2/eps^2={floor:.4g}",
                {'kappa': kappa, 'floor': floor},
            )
        return kappa


@dataclass
class SolveReport:
    """Converged (or partial) torus solution u = u0 + v with its history"""

    u: Field
    v: Field
    mean_d: float
    residual_history: list
    classification: Classification
    diagnostics: dict = field(default_factory=dict)
    background: Optional[TorusBackground] = None
    epsilon: float = 0.0
    solver: str = 'monotone'
    increment_history: list = field(default_factory=list)
    rise_history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.classification != Classification.NOT_CONVERGED

    def evaluate(self, points):
        """u at arbitrary torus points via the background plus the interpolated v"""
        return self.background.evaluate(points) + evaluate_at(self.v, points)

    def evaluate_tensor(self, x1s, x2s):
        """u on the tensor grid x1s x x2s"""
        X1, X2 = np.meshgrid(np.asarray(x1s, dtype=float), np.asarray(x2s, dtype=float), indexing='ij')
        u0 = self.background.evaluate(np.stack([X1.ravel(), X2.ravel()], axis=1)).reshape(X1.shape)
        return u0 + sample_tensor(self.v, x1s, x2s)

    def gradient_v(self, points):
        g1 = evaluate_at(self.v, points, (1, 0))
        g2 = evaluate_at(self.v, points, (0, 1))
        return np.stack([g1, g2], axis=-1)


def critical_epsilon_bound(N) -> float:
    """Necessary bound: a solution needs eps <= 1/sqrt(16 pi N)"""
    if N <= 0:
        return float('inf')
    return 1.0 / np.sqrt(16.0 * np.pi * N)


def nonlinearity(exp_u, epsilon):
    return exp_u * (1.0 - exp_u) / epsilon ** 2


def maximal_solve(cfg: VortexConfiguration, bg: TorusBackground, s: MonotoneSettings = None) -> SolveReport:
    """
    Monotone iteration (Delta - K) v_{m+1} = -K v_m - eps^-2 E(1 - E) + 4 pi N, E = e^{u0 + v_m}.

    Args:
        cfg: vortex configuration (carries eps)
        bg: background built for cfg on the working grid
        s: monotone settings

    Returns:
        SolveReport with the maximal solution and its classification

    Raises:
        NonMonotoneStep: an iterate rose beyond the aliasing slack
        NonExistenceSuspected: the iterate keeps diving below the floor
        NotConverged: max_iter reached
    """
    s = s or MonotoneSettings()
    eps = cfg.epsilon
    kappa = s.resolve_kappa(eps)
    grid = bg.grid
    N = cfg.N
    bound = critical_epsilon_bound(N)
    if eps > bound:
        logger.warning(f"eps={eps} exceeds the existence bound 1/sqrt(16 pi N)={bound:.4f}; expect no solution")
    logger.info(f"Monotone solve: N={N}, eps={eps}, n={grid.n}, K={kappa:.4g}")

    # u = 0 start: E = 1 away from the vortices, 0 at grid-coincident ones
    v = Field(grid, -bg.u0.values)
    source = 4.0 * np.pi * N
    exp_u0 = bg.exp_u0.values
    residuals, increments, rises = [], [], []
    clipped_rises = 0
    max_raw_rise = 0.0
    dive_count = 0
    diagnostics = {'kappa': kappa, 'quadrature_offset': bg.offset, 'existence_bound': bound}

    for iteration in range(1, s.max_iter + 1):
        E = exp_u0 * np.exp(v.values)
        rhs = Field(grid, -kappa * v.values - nonlinearity(E, eps) + source)
        raw = solve_helmholtz(rhs, kappa)
        step = raw.values - v.values
        increment = float(np.max(np.abs(step)))
        rise = float(np.max(step))
        allowed = Config.MONOTONE_RISE_TOL + Config.MONOTONE_ALIASING_SLACK * increment
        if rise > allowed:
            raise NonMonotoneStep(
                f"iterate {iteration} rose by {rise:.3e} (allowed {allowed:.3e}); kappa too small",
                {'iteration': iteration, 'rise': rise},
            )
        # Rises within the slack are clipped below and counted as accepted violations
        if rise > Config.MONOTONE_RISE_TOL:
            clipped_rises += 1
        max_raw_rise = max(max_raw_rise, rise)
        step_field = Field(grid, step)
        residual = float(np.max(np.abs(kappa * step - laplacian(step_field).values)))
        residuals.append(residual)
        increments.append(increment)
        rises.append(rise)
        v = Field(grid, np.minimum(raw.values, v.values))
        logger.debug(f"monotone iter {iteration}: increment={increment:.3e} residual={residual:.3e}")

        if increment <= s.tol_sup and residual <= 10.0 * s.tol_sup / eps ** 2:
            diagnostics.update({
                'iterations': iteration,
                'final_increment': increment,
                'final_residual': residual,
                'max_raw_rise': max_raw_rise,
                'max_rise': max_raw_rise,
                'clipped_rises': clipped_rises,
                'accepted_violations': clipped_rises,
            })
            report = _make_report(bg, v, residuals, increments, diagnostics, eps, rises=rises)
            report.classification = classify_dichotomy(report, bg)
            logger.info(f"Monotone solve converged in {iteration} iterations: {report.classification.value}")
            return report

        if float(v.values.min()) < Config.NONEXISTENCE_FLOOR and increment > s.tol_sup:
            dive_count += 1
            if dive_count >= Config.NONEXISTENCE_PATIENCE:
                diagnostics.update({'iterations': iteration, 'min_v': float(v.values.min()),
                                    'max_rise': max_raw_rise, 'accepted_violations': clipped_rises})
                report = _make_report(bg, v, residuals, increments, diagnostics, eps, rises=rises)
                raise NonExistenceSuspected(
                    f"iterate below {Config.NONEXISTENCE_FLOOR} for {dive_count} iterations at eps={eps} "
                    f"(existence bound {bound:.4f})",
                    report,
                    {'epsilon': eps, 'existence_bound': bound, 'iterations': iteration},
                )
        else:
            dive_count = 0

    diagnostics.update({'iterations': s.max_iter, 'max_raw_rise': max_raw_rise, 'max_rise': max_raw_rise,
                        'clipped_rises': clipped_rises, 'accepted_violations': clipped_rises})
    report = _make_report(bg, v, residuals, increments, diagnostics, eps, rises=rises)
    raise NotConverged(f"monotone scheme did not converge in {s.max_iter} iterations", report)


def _make_report(bg, v, residuals, increments, diagnostics, eps, solver='monotone', rises=None):
    u = Field(bg.grid, bg.u0.values + v.values)
    return SolveReport(
        u=u,
        v=v,
        mean_d=integrate(v),
        residual_history=residuals,
        classification=Classification.NOT_CONVERGED,
        diagnostics=diagnostics,
        background=bg,
        epsilon=eps,
        solver=solver,
        increment_history=increments,
        rise_history=list(rises or []),
    )


def classify_dichotomy(report: SolveReport, bg: TorusBackground) -> Classification:
    """Topological iff sup|u| outside the 10 eps cores is small and e^d / eps^2 >= 1"""
    eps = report.epsilon or bg.cfg.epsilon
    radius = Config.CORE_RADIUS_FACTOR * eps
    outside = distance_to_vortices(bg.cfg, bg.grid) >= radius
    sup_outside = float(np.max(np.abs(report.u.values[outside]))) if outside.any() else 0.0
    with np.errstate(over='ignore'):
        concentration = float(np.exp(report.mean_d) / eps ** 2)
    report.diagnostics.update({
        'sup_u_outside_cores': sup_outside,
        'core_radius': radius,
        'sup_threshold': Config.TOPOLOGICAL_SUP_TOL,
        'exp_d_over_eps2': concentration,
    })
    if sup_outside <= Config.TOPOLOGICAL_SUP_TOL and concentration >= 1.0:
        return Classification.TOPOLOGICAL
    return Classification.NON_TOPOLOGICAL_SUSPECT


@dataclass
class Subsolution:
    """Shifted solution w0 = w - C1 of Delta w = g_delta with its verification"""

    w0: Field
    w: Field
    delta: float
    shift: float
    c_delta: float
    worst_margin: float
    clamped: bool = False


def build_subsolution(cfg: VortexConfiguration, grid: Grid, delta: float = None, bg: TorusBackground = None) -> Subsolution:
    """
    Explicit subsolution floor for the maximal solution.

    f_delta is 1 on the balls B_delta(p_i) and 0 outside B_{2 delta}(p_i);
    g = 8 pi N f - C(delta) has mean zero, w solves Delta w = g, and w0 = w - C1
    with C1 chosen so u0 + w0 <= ln(1/2).

    Raises:
        SubsolutionFailed: the subsolution inequality fails at some grid point
    """
    N = cfg.N
    if N < 1:
        raise ValueError("subsolution needs at least one vortex")
    bg = bg or build_background(cfg, grid)
    clamped = False
    if delta is None:
        delta = 1.0 / np.sqrt(8.0 * np.pi * N)
    if 2.0 * delta >= 0.5:
        delta = 0.24
        clamped = True
        logger.warning(f"Subsolution plateau radius clamped to delta={delta}")

    cutoff = Cutoff(delta=delta)
    dist = distance_to_vortices(cfg, grid)
    f = cutoff.profile(dist)
    c_delta = 8.0 * np.pi * N * integrate(Field(grid, f))
    g = Field(grid, 8.0 * np.pi * N * f - c_delta)
    w = solve_helmholtz(g, 0.0)
    top = float(np.max(bg.u0.values + w.values))
    shift = max(top - np.log(0.5), 0.0) + 1e-12
    w0 = Field(grid, w.values - shift)

    eps = cfg.epsilon
    E = bg.exp_u0.values * np.exp(w0.values)
    lhs = laplacian(w0).values + nonlinearity(E, eps)
    margin = lhs - 4.0 * np.pi * N
    worst = float(margin.min())
    tol = 1e-8 * 8.0 * np.pi * N
    if worst < -tol:
        idx = np.unravel_index(int(np.argmin(margin)), margin.shape)
        raise SubsolutionFailed(
            f"subsolution inequality violated by {-worst:.3e} at grid index {idx} (eps={eps}, delta={delta:.4f})",
            {'worst_violation': -worst, 'index': idx, 'delta': delta},
        )
    logger.info(f"Subsolution verified: delta={delta:.4f}, C(delta)={c_delta:.4f}, C1={shift:.4f}, margin={worst:.3e}")
    return Subsolution(w0, w, float(delta), float(shift), float(c_delta), worst, clamped)


def epsilon_monotonicity(cfg: VortexConfiguration, grid: Grid, epsilons, settings: MonotoneSettings = None) -> dict:
    """
    Maximal solutions at increasing eps must decrease pointwise.

    Returns:
        dict with per-pair worst violation max(u_{eps2} - u_{eps1}) and overall flag
    """
    ordered = sorted(epsilons)
    solutions = []
    for eps in ordered:
        local = cfg.with_epsilon(eps)
        bg = build_background(local, grid)
        report = maximal_solve(local, bg, settings)
        solutions.append((eps, report.u.values))
    pairs = []
    for (e1, u1), (e2, u2) in zip(solutions, solutions[1:]):
        pairs.append({'eps_small': e1, 'eps_large': e2, 'worst_violation': float(np.max(u2 - u1))})
    worst = max((p['worst_violation'] for p in pairs), default=0.0)
    return {'pairs': pairs, 'worst_violation': worst, 'monotone': worst <= 1e-6}
