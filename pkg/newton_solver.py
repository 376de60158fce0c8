"""
Newton-Krylov solver for the smooth-variable torus equation, the
linearized operator L = Delta + eps^-2 e^u (1 - 2 e^u) and its eigenvalue nearest zero
"""
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat, PositiveInt
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, cg, eigsh, lobpcg, minres

from config import Config
from errors import IterationStalled, LinearSolveStalled, NewtonDiverged
from monotone_solver import Classification, SolveReport, classify_dichotomy, nonlinearity
from torus_field import Field, integrate, l2_norm, laplacian, solve_helmholtz
from vortex_background import TorusBackground

logger = logging.getLogger(__name__)


class Damping(str, Enum):
    NONE = 'None'
    LINE_SEARCH_HALVING = 'LineSearchHalving'


class NewtonSettings(BaseModel):
    """Newton-Krylov settings; tol_res is scaled by eps^-2"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    tol_res: PositiveFloat = Config.NEWTON_TOL_RES
    max_newton: PositiveInt = Config.NEWTON_MAX_STEPS
    krylov_tol: PositiveFloat = Config.KRYLOV_TOL
    damping: Damping = Damping.LINE_SEARCH_HALVING


@dataclass
class NewtonResult:
    """Outcome of the generic Newton loop on flat vectors"""

    x: np.ndarray
    norms: List[float]
    steps: int
    halvings: List[int] = field(default_factory=list)
    krylov_fallbacks: int = 0

    @property
    def quadratic_constant(self) -> Optional[float]:
        """C in r_{k+1} <= C r_k^2 from the last two steps of the history"""
        if len(self.norms) < 3:
            return None
        r_prev, r_last = self.norms[-2], self.norms[-1]
        if r_prev == 0:
            return None
        return float(r_last / r_prev ** 2)


def krylov_solve(A, b, M=None, rtol=Config.KRYLOV_TOL, maxiter=Config.KRYLOV_MAX_ITER):
    """
    Solve A x = b for symmetric A: preconditioned CG, MINRES when CG breaks down.

    Returns:
        (x, used_fallback)

    Raises:
        LinearSolveStalled: neither method met the relative tolerance
    """
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        return np.zeros_like(b), False
    x, info = cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    if info == 0 and np.linalg.norm(A.matvec(x) - b) <= 10.0 * rtol * b_norm:
        return x, False
    logger.debug(f"CG info={info}; falling back to MINRES")
    x, info = minres(A, b, rtol=rtol, maxiter=4 * maxiter, M=M)
    achieved = np.linalg.norm(A.matvec(x) - b) / b_norm
    if info != 0 and achieved > 10.0 * rtol:
        raise LinearSolveStalled(
            f"Krylov solve stalled: relative residual {achieved:.3e} > {rtol:.1e} (operator likely indefinite)",
            {'relative_residual': float(achieved), 'info': int(info)},
        )
    return x, True


def newton_krylov(x0, residual_fn: Callable, operator_fn: Callable, norm_fn: Callable,
                  tol: float, settings: NewtonSettings, label='newton') -> NewtonResult:
    """
    Damped Newton iteration on flat vectors.

    Args:
        x0: starting vector
        residual_fn: x -> R(x)
        operator_fn: x -> (A, M) with A = -dR/dx as a LinearOperator and M a preconditioner
        norm_fn: residual norm used for stopping and line search
        tol: stop when norm_fn(R) <= tol
        settings: NewtonSettings

    Returns:
        NewtonResult with the residual norm history

    Raises:
        NewtonDiverged: line search exhausted or step budget spent
        LinearSolveStalled: inner Krylov failure
    """
    x = np.array(x0, dtype=float)
    r = residual_fn(x)
    norms = [norm_fn(r)]
    halvings = []
    fallbacks = 0
    for step in range(1, settings.max_newton + 1):
        if norms[-1] <= tol:
            return NewtonResult(x, norms, step - 1, halvings, fallbacks)
        A, M = operator_fn(x)
        dx, used_fallback = krylov_solve(A, r, M, rtol=settings.krylov_tol)
        fallbacks += int(used_fallback)
        t = 1.0
        trial = x + dx
        r_trial = residual_fn(trial)
        n_trial = norm_fn(r_trial)
        halved = 0
        if settings.damping == Damping.LINE_SEARCH_HALVING:
            while not np.isfinite(n_trial) or n_trial > (1.0 - Config.ARMIJO_C * t) * norms[-1]:
                if halved >= Config.MAX_HALVINGS:
                    raise NewtonDiverged(
                        f"{label}: line search failed after {halved} halvings at step {step} (|R|={norms[-1]:.3e})",
                        {'step': step, 'norms': list(norms)},
                    )
                t *= 0.5
                halved += 1
                trial = x + t * dx
                r_trial = residual_fn(trial)
                n_trial = norm_fn(r_trial)
        elif not np.isfinite(n_trial):
            raise NewtonDiverged(f"{label}: non-finite residual at step {step}", {'step': step})
        x, r = trial, r_trial
        norms.append(n_trial)
        halvings.append(halved)
        logger.debug(f"{label} step {step}: |R|={n_trial:.3e} t={t:g}")
    if norms[-1] <= tol:
        return NewtonResult(x, norms, settings.max_newton, halvings, fallbacks)
    raise NewtonDiverged(
        f"{label}: no convergence in {settings.max_newton} steps (|R|={norms[-1]:.3e}, tol={tol:.3e})",
        {'norms': list(norms)},
    )


def residual(v: Field, bg: TorusBackground, eps: float) -> Field:
    """Delta v + eps^-2 E(1 - E) - 4 pi N with E = exp_u0 e^v"""
    E = bg.exp_u0.values * np.exp(v.values)
    return Field(v.grid, laplacian(v).values + nonlinearity(E, eps) - 4.0 * np.pi * bg.N)


class LinearizedOperator:
    """L h = Delta h + eps^-2 e^u (1 - 2 e^u) h at a linearization point u"""

    def __init__(self, base_u: Field, epsilon: float, base_exp: Field = None):
        self.base_u = base_u
        self.epsilon = float(epsilon)
        # e^u is kept separately so grid-coincident vortices carry e^u = 0 exactly
        self.base_exp = base_exp if base_exp is not None else Field(base_u.grid, np.exp(base_u.values))
        E = self.base_exp.values
        self.potential = Field(base_u.grid, E * (1.0 - 2.0 * E) / self.epsilon ** 2)
        self.grid = base_u.grid

    @classmethod
    def at_solution(cls, v: Field, bg: TorusBackground, eps: float):
        u = Field(v.grid, bg.u0.values + v.values)
        return cls(u, eps, Field(v.grid, bg.exp_u0.values * np.exp(v.values)))

    def apply(self, h: Field) -> Field:
        return Field(h.grid, laplacian(h).values + self.potential.values * h.values)

    def _negative_matvec(self, x):
        n = self.grid.n
        h = Field(self.grid, np.asarray(x, dtype=float).reshape(n, n))
        return -self.apply(h).values.ravel()

    def negative_operator(self) -> LinearOperator:
        """-L on flat vectors"""
        size = self.grid.n ** 2
        return LinearOperator((size, size), matvec=self._negative_matvec, dtype=float)

    def preconditioner(self) -> LinearOperator:
        """(-Delta + eps^-2)^{-1} applied spectrally"""
        n = self.grid.n
        shift = 1.0 / self.epsilon ** 2
        grid = self.grid

        def apply(x):
            rhs = Field(grid, np.asarray(x, dtype=float).reshape(n, n))
            return -solve_helmholtz(rhs, shift).values.ravel()

        return LinearOperator((n * n, n * n), matvec=apply, dtype=float)


def newton_solve(v0: Field, bg: TorusBackground, eps: float, s: NewtonSettings = None) -> SolveReport:
    """
    Newton-Krylov solve of residual(v) = 0 from v0.

    Returns:
        SolveReport (solver='newton') with the L2 residual history and the
        quadratic-convergence constant in diagnostics
    """
    s = s or NewtonSettings()
    grid = v0.grid
    n = grid.n
    tol = s.tol_res / eps ** 2
    logger.info(f"Newton solve: N={bg.N}, eps={eps}, n={n}, tol={tol:.3e}")

    def residual_fn(x):
        return residual(Field(grid, x.reshape(n, n)), bg, eps).values.ravel()

    def operator_fn(x):
        op = LinearizedOperator.at_solution(Field(grid, x.reshape(n, n)), bg, eps)
        return op.negative_operator(), op.preconditioner()

    def norm_fn(r):
        return float(np.sqrt(np.sum(r ** 2)) * grid.h)

    result = newton_krylov(v0.values.ravel(), residual_fn, operator_fn, norm_fn, tol, s, label='torus newton')
    v = Field(grid, result.x.reshape(n, n))
    report = SolveReport(
        u=Field(grid, bg.u0.values + v.values),
        v=v,
        mean_d=integrate(v),
        residual_history=list(result.norms),
        classification=Classification.NOT_CONVERGED,
        diagnostics={
            'newton_steps': result.steps,
            'final_residual': result.norms[-1],
            'quadratic_constant': result.quadratic_constant,
            'halvings': sum(result.halvings),
            'krylov_fallbacks': result.krylov_fallbacks,
        },
        background=bg,
        epsilon=eps,
        solver='newton',
    )
    report.classification = classify_dichotomy(report, bg)
    logger.info(f"Newton converged in {result.steps} steps: |R|={result.norms[-1]:.3e}")
    return report


def _initial_block(grid, size):
    x1, x2 = grid.coordinates()
    columns = [np.ones_like(x1), np.cos(2 * np.pi * x1), np.cos(2 * np.pi * x2),
               np.sin(2 * np.pi * x1), np.sin(2 * np.pi * x2)]
    block = np.stack([c.ravel() for c in columns[:size]], axis=1)
    return block / np.linalg.norm(block, axis=0)


def _lowest_pair(Lop: LinearizedOperator, tol: float):
    """Algebraically smallest eigenpair of -L by preconditioned block iteration"""
    A = Lop.negative_operator()
    M = Lop.preconditioner()
    X = _initial_block(Lop.grid, Config.EIGEN_BLOCK)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', UserWarning)
        # coarse pass fixes the scale of lambda, the second pass refines to tol
        values, vectors = lobpcg(A, X, M=M, tol=1e-4 / Lop.epsilon ** 2,
                                 maxiter=Config.EIGEN_MAX_ITER, largest=False)
        scale = max(abs(float(np.min(values))), 1.0)
        values, vectors = lobpcg(A, vectors, M=M, tol=0.1 * tol * scale,
                                 maxiter=Config.EIGEN_MAX_ITER, largest=False)
    order = np.argsort(values)
    return float(values[order[0]]), vectors[:, order[0]]


def _nearest_zero_pair(Lop: LinearizedOperator, tol: float):
    """Eigenpair of -L nearest 0 by shift-invert Lanczos; (-L)^{-1} is applied by Krylov solves"""
    A = Lop.negative_operator()
    M = Lop.preconditioner()

    def inverse(x):
        y, _ = krylov_solve(A, np.asarray(x, dtype=float).ravel(), M, rtol=Config.EIGEN_INNER_TOL)
        return y

    OPinv = LinearOperator(A.shape, matvec=inverse, dtype=float)
    # a generic start vector; the constant one is an exact eigenvector of constant potentials
    v0 = np.random.default_rng(Config.DEFAULT_SEED).standard_normal(A.shape[0])
    try:
        _, vectors = eigsh(A, k=1, sigma=0.0, which='LM', OPinv=OPinv, v0=v0, tol=tol,
                           maxiter=Config.EIGEN_MAX_ITER)
        # polish the Ritz vector by inverse iteration
        x = vectors[:, 0]
        for _ in range(2):
            x = inverse(x)
            x = x / np.linalg.norm(x)
    except LinearSolveStalled as e:
        raise IterationStalled(f"shift-invert around 0 failed, -L is numerically singular: {e}", e.details)
    except ArpackNoConvergence as e:
        raise IterationStalled(f"shift-invert Lanczos did not converge: {e}", {})
    return float(x @ A.matvec(x)), x


def smallest_eigenvalue(Lop: LinearizedOperator, tol: float = Config.EIGEN_TOL):
    """
    Eigenvalue of -L with the smallest magnitude, with its sign.

    Block iteration preconditioned by (-Delta + eps^-2)^{-1} gives the lowest
    eigenvalue; when it is positive it is also the one nearest zero. Otherwise
    -L is indefinite and the pair nearest zero comes from shift-invert Lanczos
    around 0. The returned pair satisfies |L e + lambda e| <= tol max(|lambda|, 1) |e|.

    Returns:
        (lambda_min, eigenvector Field with unit L2 norm)

    Raises:
        IterationStalled: residual bound not met, or -L singular to working precision
    """
    grid = Lop.grid
    lam, vec = _lowest_pair(Lop, tol)
    if lam <= 0:
        logger.info(f"-L is not positive (lowest eigenvalue {lam:.6g}); shift-invert around 0")
        lam, vec = _nearest_zero_pair(Lop, tol)
    e = Field(grid, vec.reshape(grid.n, grid.n))
    e = Field(grid, e.values / l2_norm(e))
    res = l2_norm(Field(grid, Lop.apply(e).values + lam * e.values))
    bound = tol * max(abs(lam), 1.0)
    if res > bound:
        raise IterationStalled(
            f"eigen iteration stalled: residual {res:.3e} > {bound:.3e} (lambda={lam:.6g})",
            {'lambda': lam, 'residual': res},
        )
    logger.info(f"lambda_min(-L) = {lam:.6g} (eps^2 lambda = {lam * Lop.epsilon ** 2:.4g}), residual {res:.2e}")
    return lam, e
