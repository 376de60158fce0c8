"""
Radial shooting for planar vortex profiles and bubbles, the flux functional
beta(s), and a truncated-box planar multivortex solver
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy.fft import dstn, idstn
from scipy.integrate import solve_ivp
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import LinearOperator
from scipy.special import k0, k1

from config import Config
from errors import NoBracket, StepFailure
from newton_solver import NewtonSettings, newton_krylov
from vortex_background import LOG_CELL_OFFSET

logger = logging.getLogger(__name__)


class ShootTag(str, Enum):
    DECAYED = 'Decayed'
    BLEW_DOWN = 'BlewDown'
    OVERSHOT = 'Overshot'
    REACHED_RMAX = 'ReachedRmax'


def vortex_nonlinearity(u):
    """e^u (1 - e^u)"""
    eu = np.exp(u)
    return eu * (1.0 - eu)


@dataclass
class RadialProfile:
    """Shot radial solution with flux and Pohozaev-mass quadratures"""

    alpha: float
    s: float
    r_max: float
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    tag: ShootTag
    flux: float
    mass: float
    r_stop: float
    tail: Optional[dict] = None
    dense: object = field(default=None, repr=False)

    @property
    def samples(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.r.tolist(), self.u.tolist(), self.du.tolist()))

    @property
    def flux_from_slope(self) -> float:
        """2 pi (2 alpha - r u'(r)) at the last sample"""
        return float(2.0 * np.pi * (2.0 * self.alpha - self.r[-1] * self.du[-1]))

    def evaluate(self, r):
        """u(r) from the dense integrator output, the series near 0 and the K0 tail"""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        r0 = self.r[0]
        near = r < r0
        out[near] = _series(self.alpha, self.s, np.maximum(r[near], 1e-300))[0]
        tail_start = self.tail['r'] if self.tail else np.inf
        inside = (~near) & (r <= min(self.r_stop, tail_start))
        if self.dense is not None:
            out[inside] = self.dense(r[inside])[0]
        else:
            out[inside] = np.interp(r[inside], self.r, self.u)
        beyond = ~(near | inside)
        if self.tail:
            out[beyond] = self.tail['c'] * k0(r[beyond])
        else:
            out[beyond] = np.nan
        return out

    def to_rows(self):
        return [{'r': r, 'u': u, 'du': du} for r, u, du in self.samples]


def _series(alpha, s, r):
    """Leading series of the regular solution at small r: (u, u')"""
    if alpha == 0:
        f = vortex_nonlinearity(s)
        return s - f * r ** 2 / 4.0, -f * r / 2.0
    a2 = 2.0 * alpha + 2.0
    es = np.exp(s)
    u = 2.0 * alpha * np.log(r) + s - es * r ** a2 / a2 ** 2
    du = 2.0 * alpha / r - es * r ** (a2 - 1.0) / a2
    return u, du


def _rhs(r, y):
    u, w = y[0], y[1]
    eu = np.exp(u)
    f = eu * (1.0 - eu)
    return [w, -w / r - f, 2.0 * np.pi * r * f, 2.0 * np.pi * r * (1.0 - eu) ** 2]


def _blow_down(r, y):
    return y[0] + Config.BLOWDOWN_LEVEL


_blow_down.terminal = True
_blow_down.direction = -1


def _overshoot(r, y):
    return y[0]


_overshoot.terminal = True
_overshoot.direction = 1


def _turnaround(r, y):
    return y[1]


_turnaround.terminal = True
_turnaround.direction = -1


def shoot(alpha: float, s: float, r_max: float, tail_floor: float = None,
          stop_on_turnaround: bool = False) -> RadialProfile:
    """
    Integrate u'' + u'/r + e^u(1 - e^u) = 0 from the series start.

    Args:
        alpha: vortex multiplicity at the origin (0 for bubbles)
        s: u(0) when alpha = 0, else the regular-part value at 0
        r_max: outer radius
        tail_floor: when set, switch to the linearized K0 tail once u >= -tail_floor
        stop_on_turnaround: stop when u' changes sign from + to - (certain blow-down)

    Returns:
        RadialProfile with a terminal tag

    Raises:
        StepFailure: the integrator could not meet its tolerance
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if alpha == 0 and s >= 0:
        raise ValueError(f"bubble shots need s < 0, got {s}")
    if r_max <= Config.SHOOT_R0:
        raise ValueError(f"r_max must exceed the series start {Config.SHOOT_R0}")

    r0 = Config.SHOOT_R0
    u0, du0 = _series(alpha, s, r0)
    if alpha == 0:
        flux0 = np.pi * r0 ** 2 * vortex_nonlinearity(s)
        mass0 = np.pi * r0 ** 2 * (1.0 - np.exp(s)) ** 2
    else:
        flux0 = 2.0 * np.pi * np.exp(s) * r0 ** (2.0 * alpha + 2.0) / (2.0 * alpha + 2.0)
        mass0 = np.pi * r0 ** 2
    events = [_blow_down, _overshoot]
    if stop_on_turnaround:
        events.append(_turnaround)
    if tail_floor is not None:
        def _floor(r, y):
            return y[0] + tail_floor
        _floor.terminal = True
        _floor.direction = 1
        events.append(_floor)

    sol = solve_ivp(_rhs, (r0, r_max), [u0, du0, flux0, mass0], method='DOP853',
                    rtol=Config.SHOOT_RTOL, atol=Config.SHOOT_ATOL, events=events, dense_output=True)
    if sol.status == -1:
        raise StepFailure(f"radial shot failed (alpha={alpha}, s={s}): {sol.message}", {'alpha': alpha, 's': s})

    tag = ShootTag.REACHED_RMAX
    fired = [i for i, t in enumerate(sol.t_events) if len(t)]
    if sol.status == 1 and fired:
        first = events[fired[0]]
        if first is _overshoot:
            tag = ShootTag.OVERSHOT
        elif first is _blow_down or first is _turnaround:
            tag = ShootTag.BLEW_DOWN
        else:
            tag = ShootTag.DECAYED

    r, y = sol.t, sol.y
    flux, mass = float(y[2, -1]), float(y[3, -1])
    tail = None
    r_stop = float(r[-1])
    samples_r, samples_u, samples_du = r, y[0], y[1]
    if tag == ShootTag.DECAYED:
        r_f, u_f = float(r[-1]), float(y[0, -1])
        c = u_f / k0(r_f)
        tail_flux = -2.0 * np.pi * c * r_f * k1(r_f)
        tail_mass = np.pi * c ** 2 * r_f ** 2 * (k1(r_f) ** 2 - k0(r_f) ** 2)
        flux += tail_flux
        mass += tail_mass
        tail = {'r': r_f, 'c': float(c), 'flux': float(tail_flux), 'mass': float(tail_mass)}
        if r_max > r_f:
            extra = np.linspace(r_f, r_max, 64)[1:]
            samples_r = np.concatenate([r, extra])
            samples_u = np.concatenate([y[0], c * k0(extra)])
            samples_du = np.concatenate([y[1], -c * k1(extra)])

    logger.debug(f"shoot alpha={alpha} s={s:.15g}: {tag.value} at r={r_stop:.4g}")
    return RadialProfile(float(alpha), float(s), float(r_max), np.asarray(samples_r), np.asarray(samples_u),
                         np.asarray(samples_du), tag, flux, mass, r_stop, tail, sol.sol)


def beta(s: float, r_max: float = Config.BETA_R_MAX) -> float:
    """
    Total flux of the radial bubble with u(0) = s.

    Computed as -2 pi lim r u'(r) and checked against the quadrature; both
    carry the analytic contribution of the log tail past the blow-down cutoff.
    """
    profile = shoot(0.0, s, r_max)
    r_b, u_b, du_b = profile.r[-1], profile.u[-1], profile.du[-1]
    m = r_b * du_b
    tail = 0.0
    if profile.tag == ShootTag.BLEW_DOWN and -m > 2.0:
        tail = 2.0 * np.pi * r_b ** 2 * np.exp(u_b) / (-m - 2.0)
    from_slope = -2.0 * np.pi * m + tail
    from_quadrature = profile.flux + tail
    gap = abs(from_slope - from_quadrature) / abs(from_quadrature)
    if gap > 1e-3:
        raise StepFailure(
            f"beta({s}) evaluations disagree: slope {from_slope:.8g} vs quadrature {from_quadrature:.8g}",
            {'s': s, 'gap': gap},
        )
    return float(from_slope)


def beta_table(s_values, workers: int = None) -> dict:
    """beta on a list of s values (parallel, order kept) with a monotonicity flag"""
    s_values = [float(s) for s in s_values]
    with ThreadPoolExecutor(max_workers=workers or Config.WORKERS) as pool:
        values = list(pool.map(beta, s_values))
    rows = [{'s': s, 'beta': b} for s, b in zip(s_values, values)]
    ordered = sorted(rows, key=lambda row: row['s'])
    increasing = all(a['beta'] < b['beta'] for a, b in zip(ordered, ordered[1:]))
    return {'rows': rows, 'strictly_increasing': increasing}


def _fate(alpha, s):
    return shoot(alpha, s, 1e3, stop_on_turnaround=True).tag


def find_topological_threshold(alpha: float, r_max: float = 40.0, s_low: float = -20.0,
                               s_high: float = 20.0) -> float:
    """
    Bisection on s between a BlewDown and an Overshot shot down to a 1e-12 bracket.

    Raises:
        NoBracket: both initial shots share a tag
    """
    if alpha <= 0:
        raise ValueError(f"threshold shooting needs alpha > 0, got {alpha}")
    low_tag, high_tag = _fate(alpha, s_low), _fate(alpha, s_high)
    if low_tag == high_tag or low_tag != ShootTag.BLEW_DOWN or high_tag != ShootTag.OVERSHOT:
        raise NoBracket(
            f"no bracket for alpha={alpha}: s={s_low} -> {low_tag.value}, s={s_high} -> {high_tag.value}",
            {'alpha': alpha, 's_low': s_low, 's_high': s_high},
        )
    lo, hi = s_low, s_high
    shots = 0
    while hi - lo > Config.BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _fate(alpha, mid) == ShootTag.OVERSHOT:
            hi = mid
        else:
            lo = mid
        shots += 1
    s_star = 0.5 * (lo + hi)
    logger.info(f"Topological threshold alpha={alpha}: s*={s_star:.15g} after {shots} shots")
    return s_star


def threshold_profile(alpha: float, r_max: float = 40.0, s_star: float = None) -> RadialProfile:
    """Decayed radial vortex profile at s*, continued by its K0 tail"""
    if s_star is None:
        s_star = find_topological_threshold(alpha, r_max)
    return shoot(alpha, s_star, r_max, tail_floor=Config.TAIL_FLOOR)


def tail_slope(profile: RadialProfile, r_min: float = 4.0) -> float:
    """Slope of log|u| against r past the knee (close to -1 for mass one)"""
    r_end = profile.tail['r'] if profile.tail else profile.r_stop
    mask = (profile.r >= r_min) & (profile.r <= r_end) & (profile.u < 0)
    slope, _ = np.polyfit(profile.r[mask], np.log(-profile.u[mask]), 1)
    return float(slope)


# Planar multivortex solve on [-R, R]^2 with u = 0 on the edge

def _log_core(rho):
    """ln(1 - e^{-rho}) with -inf at rho = 0"""
    with np.errstate(divide='ignore'):
        return np.log(-np.expm1(-rho))


def _core_laplacian(rho):
    """Smooth part of Delta ln(1 - e^{-|x|^2}) as a function of rho = |x|^2"""
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    small = rho < 1e-3
    r = rho[small]
    out[small] = -2.0 + 2.0 * r / 3.0
    r = rho[~small]
    em = np.exp(-r)
    out[~small] = 4.0 * (em * (1.0 - r) - em ** 2) / (-np.expm1(-r)) ** 2
    return out


@dataclass
class PlanarSolution:
    """psi = sum alpha_i ln(1 - e^{-|x - p_i|^2}) + v on [-R, R]^2 with v = 0 on the edge"""

    R: float
    n: int
    nodes: np.ndarray
    v: np.ndarray
    vortices: List[Tuple[Tuple[float, float], float]]
    decay_fit: Tuple[float, float] = (0.0, 1.0)
    diagnostics: dict = field(default_factory=dict)
    interpolation: str = 'spectral'

    def __post_init__(self):
        self._coeffs = dstn(self.v, type=1) / float(self.n) ** 2
        self._spline = None

    @property
    def H(self) -> float:
        return 2.0 * self.R / self.n

    @property
    def positions(self):
        return np.array([p for p, _ in self.vortices], dtype=float).reshape(-1, 2)

    @property
    def alphas(self):
        return np.array([a for _, a in self.vortices], dtype=float)

    @property
    def centroid(self):
        if not self.vortices:
            return np.zeros(2)
        return np.average(self.positions, axis=0, weights=self.alphas)

    @property
    def psi(self) -> np.ndarray:
        """psi on the interior nodes; vortex-coincident nodes get the cell-average log"""
        X1, X2 = np.meshgrid(self.nodes, self.nodes, indexing='ij')
        total = self.v.copy()
        cell = 2.0 * (np.log(self.H / 2.0) + LOG_CELL_OFFSET)
        for p, alpha in self.vortices:
            rho = (X1 - p[0]) ** 2 + (X2 - p[1]) ** 2
            safe = np.where(rho == 0, 1.0, rho)
            total += alpha * np.where(rho == 0, cell, _log_core(safe))
        return total

    def _sine_basis(self, x, order):
        k = np.arange(1, self.n)
        w = np.pi * k / (2.0 * self.R)
        phase = np.outer(np.asarray(x, dtype=float).ravel() + self.R, w)
        if order == 0:
            return np.sin(phase)
        return w * np.cos(phase)

    def _spline_model(self):
        if self._spline is None:
            full = np.zeros((self.n + 1, self.n + 1))
            full[1:-1, 1:-1] = self.v
            xs = -self.R + self.H * np.arange(self.n + 1)
            self._spline = RectBivariateSpline(xs, xs, full, kx=3, ky=3)
        return self._spline

    def v_tensor(self, y1s, y2s, derivative=(0, 0)):
        """Smooth part v on a tensor grid (inside the box)"""
        if self.interpolation == 'bicubic':
            return self._spline_model()(np.asarray(y1s), np.asarray(y2s), dx=derivative[0], dy=derivative[1], grid=True)
        b1 = self._sine_basis(y1s, derivative[0])
        b2 = self._sine_basis(y2s, derivative[1])
        return b1 @ self._coeffs @ b2.T

    def v_points(self, points, derivative=(0, 0)):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.interpolation == 'bicubic':
            return self._spline_model().ev(pts[:, 0], pts[:, 1], dx=derivative[0], dy=derivative[1])
        b1 = self._sine_basis(pts[:, 0], derivative[0])
        b2 = self._sine_basis(pts[:, 1], derivative[1])
        return np.sum((b1 @ self._coeffs) * b2, axis=1)

    def _tail(self, Y1, Y2):
        c1, c2 = self.decay_fit
        c = self.centroid
        return -c1 * np.exp(-c2 * np.hypot(Y1 - c[0], Y2 - c[1]))

    def fields(self, Y1, Y2, v, g1, g2):
        """psi, e^psi, grad psi and the regular part psi - sum alpha ln|y - p|^2 from v samples"""
        psi = v.copy()
        exp_factor = np.ones_like(v)
        grad1, grad2 = g1.copy(), g2.copy()
        regular = v.copy()
        for p, alpha in self.vortices:
            d1, d2 = Y1 - p[0], Y2 - p[1]
            rho = d1 ** 2 + d2 ** 2
            safe = np.where(rho == 0, 1.0, rho)
            core = -np.expm1(-rho)
            psi += alpha * _log_core(rho)
            exp_factor *= core ** alpha
            small = rho < 1e-8
            regular += alpha * np.where(small, -0.5 * rho, np.log(np.where(small, 1.0, core / safe)))
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                weight = np.where(rho == 0, 0.0, 2.0 * alpha / np.expm1(safe))
            grad1 += weight * d1
            grad2 += weight * d2
        return {
            'psi': psi,
            'exp': exp_factor * np.exp(v),
            'grad1': grad1,
            'grad2': grad2,
            'regular': regular,
        }

    def evaluate_tensor(self, y1s, y2s) -> dict:
        """psi-related fields on the tensor grid y1s x y2s; outside the box the tail model applies"""
        y1s, y2s = np.asarray(y1s, dtype=float), np.asarray(y2s, dtype=float)
        Y1, Y2 = np.meshgrid(y1s, y2s, indexing='ij')
        in1 = np.abs(y1s) < self.R
        in2 = np.abs(y2s) < self.R
        v = np.zeros(Y1.shape)
        g1 = np.zeros(Y1.shape)
        g2 = np.zeros(Y1.shape)
        if in1.any() and in2.any():
            block = np.ix_(in1, in2)
            v[block] = self.v_tensor(y1s[in1], y2s[in2])
            g1[block] = self.v_tensor(y1s[in1], y2s[in2], (1, 0))
            g2[block] = self.v_tensor(y1s[in1], y2s[in2], (0, 1))
        out = self.fields(Y1, Y2, v, g1, g2)
        outside = ~(in1[:, None] & in2[None, :])
        if outside.any():
            tail = self._tail(Y1[outside], Y2[outside])
            out['psi'][outside] = tail
            out['exp'][outside] = np.exp(tail)
            out['regular'][outside] = tail
            c = self.centroid
            rr = np.hypot(Y1[outside] - c[0], Y2[outside] - c[1])
            rr = np.where(rr == 0, 1.0, rr)
            out['grad1'][outside] = -self.decay_fit[1] * tail * (Y1[outside] - c[0]) / rr
            out['grad2'][outside] = -self.decay_fit[1] * tail * (Y2[outside] - c[1]) / rr
        return out

    def evaluate(self, points) -> np.ndarray:
        """psi at arbitrary planar points"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(np.abs(pts) < self.R, axis=1)
        v = np.zeros(len(pts))
        if inside.any():
            v[inside] = self.v_points(pts[inside])
        zeros = np.zeros(len(pts))
        out = self.fields(pts[:, 0], pts[:, 1], v, zeros, zeros)['psi']
        if (~inside).any():
            out[~inside] = self._tail(pts[~inside, 0], pts[~inside, 1])
        return out

    def evaluate_exp(self, points) -> np.ndarray:
        """e^psi, exactly 0 at the vortex points"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(np.abs(pts) < self.R, axis=1)
        v = np.zeros(len(pts))
        if inside.any():
            v[inside] = self.v_points(pts[inside])
        zeros = np.zeros(len(pts))
        out = self.fields(pts[:, 0], pts[:, 1], v, zeros, zeros)['exp']
        if (~inside).any():
            out[~inside] = np.exp(self._tail(pts[~inside, 0], pts[~inside, 1]))
        return out


def _planar_operators(R, n):
    k = np.arange(1, n)
    lam1 = (np.pi * k / (2.0 * R)) ** 2
    symbol = lam1[:, None] + lam1[None, :]
    return symbol


def fit_decay(solution: PlanarSolution, rings: int = 12, angles: int = 64) -> Tuple[float, float]:
    """
    Fit |psi| <= c1 exp(-c2 |x - centroid|) on rings past the vortex cores.

    Returns:
        (c1, c2) with c1 raised so the bound holds on every sampled ring
    """
    c = solution.centroid
    spread = float(np.max(np.hypot(*(solution.positions - c).T))) if solution.vortices else 0.0
    r_lo = spread + 5.0
    r_hi = max(solution.R / 2.0, r_lo + 2.0)
    radii = np.linspace(r_lo, r_hi, rings)
    theta = np.linspace(0.0, 2.0 * np.pi, angles, endpoint=False)
    peaks = []
    for r in radii:
        pts = np.stack([c[0] + r * np.cos(theta), c[1] + r * np.sin(theta)], axis=1)
        peaks.append(float(np.max(np.abs(solution.evaluate(pts)))))
    peaks = np.asarray(peaks)
    usable = peaks > 1e-11
    if usable.sum() < 3:
        return 0.0, 1.0
    slope, _ = np.polyfit(radii[usable], np.log(peaks[usable]), 1)
    c2 = float(-slope)
    c1 = float(np.max(peaks[usable] * np.exp(c2 * radii[usable])))
    return c1, c2


def planar_multivortex_solve(vortices, R: float = Config.PLANAR_HALF_WIDTH, n: int = Config.PLANAR_GRID,
                             settings: NewtonSettings = None, interpolation: str = 'spectral') -> PlanarSolution:
    """
    Solve Delta u + e^u(1 - e^u) = 4 pi sum alpha_i delta_{p_i} on [-R, R]^2, u = 0 on the edge.

    Each core alpha ln(1 - e^{-|x-p|^2}) equals 2 alpha ln|x - p| plus a smooth term, the same
    singular part as alpha ln(|x-p|^2 / (1 + |x-p|^2)); the two splittings differ only in the smooth v.

    Args:
        vortices: list of ((x, y), alpha)
        R: box half width (>= 20)
        n: cells per axis of the sine-spectral grid
        settings: Newton settings (tol_res is an absolute L2 bound here)

    Returns:
        PlanarSolution with fitted decay constants
    """
    vortices = [((float(p[0]), float(p[1])), float(a)) for p, a in vortices]
    if R < Config.PLANAR_MIN_HALF_WIDTH:
        raise ValueError(f"box half width must be >= {Config.PLANAR_MIN_HALF_WIDTH}, got {R}")
    for p, alpha in vortices:
        if max(abs(p[0]), abs(p[1])) > R / 2.0:
            raise ValueError(f"vortex {p} outside [-R/2, R/2]^2 for R={R}")
        if alpha <= 0:
            raise ValueError(f"multiplicity must be positive, got {alpha}")
    settings = settings or NewtonSettings(tol_res=Config.PLANAR_TOL_RES)
    H = 2.0 * R / n
    nodes = -R + H * np.arange(1, n)
    X1, X2 = np.meshgrid(nodes, nodes, indexing='ij')
    m = n - 1
    symbol = _planar_operators(R, n)

    exp_core = np.ones((m, m))
    source = np.zeros((m, m))
    for p, alpha in vortices:
        rho = (X1 - p[0]) ** 2 + (X2 - p[1]) ** 2
        exp_core *= (-np.expm1(-rho)) ** alpha
        source += alpha * _core_laplacian(rho)

    def lap(v):
        return idstn(-symbol * dstn(v, type=1), type=1)

    def residual_fn(x):
        v = x.reshape(m, m)
        E = exp_core * np.exp(v)
        return (lap(v) + E * (1.0 - E) + source).ravel()

    def operator_fn(x):
        E = exp_core * np.exp(x.reshape(m, m))
        potential = E * (1.0 - 2.0 * E)

        def neg_jac(h):
            h = np.asarray(h, dtype=float).reshape(m, m)
            return -(lap(h) + potential * h).ravel()

        def precond(r):
            r = np.asarray(r, dtype=float).reshape(m, m)
            return idstn(dstn(r, type=1) / (symbol + 1.0), type=1).ravel()

        size = m * m
        return (LinearOperator((size, size), matvec=neg_jac, dtype=float),
                LinearOperator((size, size), matvec=precond, dtype=float))

    def norm_fn(r):
        return float(np.sqrt(np.sum(r ** 2)) * H)

    logger.info(f"Planar solve: {len(vortices)} vortices, R={R}, n={n}")
    result = newton_krylov(np.zeros(m * m), residual_fn, operator_fn, norm_fn, settings.tol_res, settings,
                           label='planar newton')
    solution = PlanarSolution(R, n, nodes, result.x.reshape(m, m), vortices,
                              diagnostics={'newton_steps': result.steps, 'final_residual': result.norms[-1],
                                           'residual_history': list(result.norms)},
                              interpolation=interpolation)
    solution.decay_fit = fit_decay(solution)
    logger.info(f"Planar solve done in {result.steps} steps; decay fit c1={solution.decay_fit[0]:.4g}, "
                f"c2={solution.decay_fit[1]:.4f}")
    return solution
