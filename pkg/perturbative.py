"""
Perturbative construction of torus vortex solutions from a planar profile:
u = eta psi_eps + eps^p v with psi_eps(x) = psi((x - center) / eps), solved
for v by the fixed-point map G(v) = v - DF(0)^{-1} F(v)
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat

from config import Config
from errors import ContractionFailed, PlanarDomainTooSmall
from torus_field import Field, Grid, band_limited_noise, evaluate_at, l2_norm, laplacian, sample_tensor
from vortex_background import LOG_CELL_OFFSET, TorusBackground, VortexConfiguration, min_image, regular_part

logger = logging.getLogger(__name__)


def _phi(s):
    """e^{-1/s} for s > 0, 0 otherwise, with its first two derivatives"""
    s = np.asarray(s, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    value = np.where(pos, np.exp(-1.0 / safe), 0.0)
    d1 = value / safe ** 2
    d2 = value * (1.0 / safe ** 4 - 2.0 / safe ** 3)
    return value, d1, d2


class Cutoff(BaseModel):
    """Smooth radial bump: 1 on B_delta, 0 outside B_{2 delta}, monotone in between"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    delta: PositiveFloat = Config.CUTOFF_DELTA

    def _ramp(self, r):
        """H(t), H'(t), H''(t) at t = (r - delta) / delta clipped to [0, 1]"""
        t = np.clip((np.asarray(r, dtype=float) - self.delta) / self.delta, 0.0, 1.0)
        a, a1, a2 = _phi(1.0 - t)
        b, b1, b2 = _phi(t)
        # d/dt of a(t) = phi(1 - t) flips the sign of the odd derivative
        a1 = -a1
        S = a + b
        S1 = a1 + b1
        num = a1 * b - a * b1
        num1 = a2 * b - a * b2
        H = a / S
        H1 = num / S ** 2
        H2 = num1 / S ** 2 - 2.0 * num * S1 / S ** 3
        return H, H1, H2

    def profile(self, r):
        return self._ramp(r)[0]

    def radial_derivatives(self, r):
        """(eta, eta_r, Delta eta) as functions of the radius"""
        r = np.asarray(r, dtype=float)
        H, H1, H2 = self._ramp(r)
        eta_r = H1 / self.delta
        eta_rr = H2 / self.delta ** 2
        safe = np.where(r > 0, r, 1.0)
        lap = np.where(r > 0, eta_rr + eta_r / safe, 0.0)
        return H, eta_r, lap

    def fields_on_torus(self, grid: Grid, center=(0.5, 0.5)):
        """eta, grad eta (two arrays) and Delta eta on the grid around center"""
        d1, d2 = _wrapped_axes(grid, center)
        D1, D2 = np.meshgrid(d1, d2, indexing='ij')
        r = np.hypot(D1, D2)
        eta, eta_r, lap = self.radial_derivatives(r)
        safe = np.where(r > 0, r, 1.0)
        g1 = np.where(r > 0, eta_r * D1 / safe, 0.0)
        g2 = np.where(r > 0, eta_r * D2 / safe, 0.0)
        return eta, g1, g2, lap


def _wrap(d):
    return (np.asarray(d, dtype=float) + 0.5) % 1.0 - 0.5


def _wrapped_axes(grid, center):
    x = np.arange(grid.n) * grid.h
    return _wrap(x - center[0]), _wrap(x - center[1])


def f_vortex(w):
    """e^w (1 - e^w) evaluated with expm1, finite at w = -inf"""
    return np.exp(w) * -np.expm1(w)


def f_vortex_prime(w):
    E = np.exp(w)
    return E * (1.0 - 2.0 * E)


class PerturbativeProblem:
    """Planar profile transplanted to the torus with its cutoff, ready for F_eps"""

    def __init__(self, planar, epsilon: float, grid: Grid, center: Tuple[float, float] = (0.5, 0.5),
                 cutoff: Cutoff = None, power: int = Config.PERTURB_POWER):
        self.planar = planar
        self.epsilon = float(epsilon)
        self.grid = grid
        self.center = (float(center[0]) % 1.0, float(center[1]) % 1.0)
        self.cutoff = cutoff or Cutoff()
        self.power = int(power)
        eps = self.epsilon
        if 2.0 * self.cutoff.delta >= 0.5:
            raise ValueError(f"cutoff support 2 delta={2 * self.cutoff.delta} does not fit in the unit torus")
        reach = 2.0 * self.cutoff.delta / eps
        if reach > planar.R:
            raise PlanarDomainTooSmall(
                f"rescaled cutoff support 2 delta/eps={reach:.3g} exceeds the planar half width R={planar.R}",
                {'reach': reach, 'R': planar.R, 'epsilon': eps},
            )

        d1, d2 = _wrapped_axes(grid, self.center)
        fields = planar.evaluate_tensor(d1 / eps, d2 / eps)
        eta, g1, g2, lap_eta = self.cutoff.fields_on_torus(grid, self.center)
        psi = fields['psi']
        annulus = (g1 != 0) | (g2 != 0) | (lap_eta != 0)

        Y1, Y2 = np.meshgrid(d1 / eps, d2 / eps, indexing='ij')
        weight = np.zeros_like(psi)
        for q, alpha in planar.vortices:
            weight += alpha * ((Y1 == q[0]) & (Y2 == q[1]))
        cell = 2.0 * (np.log(grid.h / (2.0 * eps)) + LOG_CELL_OFFSET)
        psi_finite = np.where(np.isfinite(psi), psi, fields['regular'] + weight * cell)

        self.eta = eta
        # eta = 1 wherever psi = -inf, so eta * psi is never 0 * inf
        self.eta_psi = np.where(eta == 1.0, psi, eta * psi_finite)
        self.eta_f_psi = eta * f_vortex(psi)
        forcing = np.zeros_like(psi)
        forcing[annulus] = (2.0 * (g1 * fields['grad1'] + g2 * fields['grad2'])[annulus] / eps
                            + (psi_finite * lap_eta)[annulus])
        self.forcing = forcing * eps ** (-self.power)
        self.psi_eps = Field(grid, psi_finite)
        self.regular = fields['regular']
        self.base_exp = np.exp(self.eta_psi)
        logger.info(f"Perturbative problem: eps={eps}, n={grid.n}, delta={self.cutoff.delta}, "
                    f"center={self.center}, power={self.power}")

    @property
    def scale(self) -> float:
        """eps^p"""
        return self.epsilon ** self.power

    def torus_configuration(self) -> VortexConfiguration:
        """Vortices center + eps q_i on the torus"""
        points = [(self.center[0] + self.epsilon * q[0], self.center[1] + self.epsilon * q[1])
                  for q, _ in self.planar.vortices]
        mults = [int(round(alpha)) for _, alpha in self.planar.vortices]
        return VortexConfiguration(points=points, multiplicities=mults, epsilon=self.epsilon)

    def F(self, v: Field) -> Field:
        """F_eps(v) = Delta v + eps^{-2-p}[f(eta psi + eps^p v) - eta f(psi)] + eps^{-p}(2 grad eta . grad psi + psi Delta eta)"""
        eps = self.epsilon
        w = self.eta_psi + self.scale * v.values
        nonlinear = (f_vortex(w) - self.eta_f_psi) * eps ** (-2.0 - self.power)
        return Field(v.grid, laplacian(v).values + nonlinear + self.forcing)

    def linearization(self, v: Field = None):
        """DF_eps(v) as a LinearizedOperator (Delta + eps^-2 f'(eta psi + eps^p v))"""
        from newton_solver import LinearizedOperator

        w = self.eta_psi if v is None else self.eta_psi + self.scale * v.values
        base_u = Field(self.grid, np.where(np.isfinite(w), w, self.psi_eps.values))
        return LinearizedOperator(base_u, self.epsilon, Field(self.grid, np.exp(w)))

    def physical_residual(self, v: Field) -> float:
        """eps^p |F_eps(v)|_2, the L2 residual of the torus equation for u"""
        return self.scale * l2_norm(self.F(v))


@dataclass
class PerturbState:
    """u = eta psi_eps + eps^p v on the torus grid"""

    psi_eps: Field
    v: Field
    epsilon: float
    residual_norm: float
    problem: Optional[PerturbativeProblem] = field(default=None, repr=False)
    history: List[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def u(self) -> Field:
        p = self.problem
        values = np.where(p.eta == 1.0, self.psi_eps.values, p.eta * self.psi_eps.values)
        return Field(self.v.grid, values + p.scale * self.v.values)

    def evaluate(self, points):
        """u at arbitrary torus points (-inf at the vortices)"""
        p = self.problem
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = _wrap(pts - np.asarray(p.center))
        eta = p.cutoff.profile(np.hypot(d[:, 0], d[:, 1]))
        out = np.zeros(len(pts))
        live = eta > 0
        if live.any():
            out[live] = eta[live] * p.planar.evaluate(d[live] / p.epsilon)
        return out + p.scale * evaluate_at(self.v, pts)

    def evaluate_tensor(self, x1s, x2s):
        p = self.problem
        d1 = _wrap(np.asarray(x1s, dtype=float) - p.center[0])
        d2 = _wrap(np.asarray(x2s, dtype=float) - p.center[1])
        psi = p.planar.evaluate_tensor(d1 / p.epsilon, d2 / p.epsilon)['psi']
        D1, D2 = np.meshgrid(d1, d2, indexing='ij')
        eta = p.cutoff.profile(np.hypot(D1, D2))
        core = np.where(eta == 1.0, psi, eta * np.where(np.isfinite(psi), psi, 0.0))
        return core + p.scale * sample_tensor(self.v, x1s, x2s)

    def torus_smooth(self, bg: TorusBackground) -> Field:
        """
        v_torus = u - u0 for the background of the same vortices.

        Inside the plateau the logarithms cancel analytically:
        psi_eps - u0 = regular - 2 N ln eps + 4 pi sum alpha_i gamma(x - p_i) + offset.
        """
        p = self.problem
        grid = self.v.grid
        x1, x2 = grid.coordinates()
        X = np.stack([x1, x2], axis=-1)
        smooth = p.regular - 2.0 * bg.N * np.log(p.epsilon) + bg.offset
        for pos, alpha in zip(bg.cfg.positions, bg.cfg.alphas):
            smooth = smooth + 4.0 * np.pi * alpha * regular_part(min_image(X - pos))
        outside = p.eta * self.psi_eps.values - bg.u0.values
        values = np.where(p.eta == 1.0, smooth, outside)
        return Field(grid, values + p.scale * self.v.values)


def contraction_solve(problem: PerturbativeProblem, tol: float = Config.PERTURB_TOL,
                      max_iter: int = Config.CONTRACTION_MAX_ITER, seed: int = Config.DEFAULT_SEED) -> PerturbState:
    """
    Fixed-point iteration v_{k+1} = v_k - DF(0)^{-1} F(v_k) from v_0 = 0.

    Args:
        problem: transplanted planar profile
        tol: stop once eps^p |F(v_k)|_2 <= tol / eps^2
        max_iter: iteration budget
        seed: seed of the band-limited direction used for the linearization drift

    Returns:
        PerturbState with the iteration history and contraction diagnostics

    Raises:
        ContractionFailed: increments stopped shrinking or the budget ran out
    """
    from newton_solver import krylov_solve

    grid = problem.grid
    eps = problem.epsilon
    threshold = tol / eps ** 2
    op = problem.linearization()
    A = op.negative_operator()
    M = op.preconditioner()

    v = Field.zeros(grid)
    F = problem.F(v)
    residual = problem.scale * l2_norm(F)
    initial_residual = residual
    history = [{'k': 0, 'increment': 0.0, 'residual': residual}]
    increments = []
    stalled = 0
    k = 0
    while residual > threshold:
        if k >= max_iter:
            raise ContractionFailed(
                f"contraction did not reach {threshold:.3e} in {max_iter} steps (residual {residual:.3e})",
                {'history': history},
            )
        k += 1
        # DF(0) s = F(v)  <=>  (-DF(0)) s = -F(v)
        step, _ = krylov_solve(A, -F.values.ravel(), M)
        step = step.reshape(grid.n, grid.n)
        v = Field(grid, v.values - step)
        increment = float(np.sqrt(np.sum(step ** 2)) * grid.h)
        if increments and increment >= increments[-1]:
            stalled += 1
        else:
            stalled = 0
        increments.append(increment)
        F = problem.F(v)
        residual = problem.scale * l2_norm(F)
        history.append({'k': k, 'increment': increment, 'residual': residual})
        logger.debug(f"contraction step {k}: |dv|={increment:.3e} eps^p|F|={residual:.3e}")
        if stalled >= Config.CONTRACTION_PATIENCE:
            raise ContractionFailed(
                f"increments failed to shrink over {stalled} consecutive steps (last {increment:.3e})",
                {'history': history},
            )

    ratios = [b / a for a, b in zip(increments, increments[1:]) if a > 0]
    direction = band_limited_noise(grid, kmax=Config.UNIQUENESS_KMAX, amplitude=1.0, rng=np.random.default_rng(seed))
    drift = l2_norm(Field(grid, (problem.linearization(v).potential.values - op.potential.values) * direction.values))
    drift /= l2_norm(direction)
    lap_v = laplacian(v)
    diagnostics = {
        'iterations': k,
        'initial_residual': initial_residual,
        'final_residual': residual,
        'contraction_ratio': float(max(ratios)) if ratios else 0.0,
        'linearization_drift': float(drift),
        'v_sup': v.sup(),
        'v_h2_norm': l2_norm(v) + l2_norm(lap_v),
        'power': problem.power,
    }
    logger.info(f"Contraction converged in {k} steps: eps^p|F|={residual:.3e}, ratio={diagnostics['contraction_ratio']:.3g}")
    return PerturbState(problem.psi_eps, v, eps, residual, problem, history, diagnostics)


def rescaled_compare(u_obj, psi, eps: float, d: float, center=(0.5, 0.5), samples: int = 129) -> float:
    """
    sup over |y| <= d/eps of |u(center + eps y) - psi(y)|.

    Args:
        u_obj: any torus solution with evaluate_tensor (SolveReport, PerturbState)
        psi: PlanarSolution
        eps: scale
        d: comparison radius on the torus
        center: torus point mapped to y = 0
    """
    radius = d / eps
    ys = np.linspace(-radius, radius, samples)
    x1s = center[0] + eps * ys
    x2s = center[1] + eps * ys
    u_hat = u_obj.evaluate_tensor(x1s, x2s)
    planar = psi.evaluate_tensor(ys, ys)['psi']
    Y1, Y2 = np.meshgrid(ys, ys, indexing='ij')
    inside = np.hypot(Y1, Y2) <= radius
    with np.errstate(invalid='ignore'):
        diff = np.abs(u_hat - planar)
    diff = np.where(inside & np.isfinite(diff), diff, np.nan)
    sup = float(np.nanmax(diff))
    logger.info(f"Rescaled comparison eps={eps}, d={d}: sup diff {sup:.3e}")
    return sup


def fit_exponential_smallness(eps_values, norms) -> dict:
    """Least-squares fit of log(norm) against 1/eps; slope < 0 means exponential smallness"""
    x = 1.0 / np.asarray(eps_values, dtype=float)
    y = np.log(np.asarray(norms, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {'slope': float(slope), 'intercept': float(intercept), 'r_squared': r_squared}
