"""Value functions and optimal thresholds for the maximum-process stopping problem.

The diagonal value V(s, s) is computed from the explicit excursion-depth
formula (with the survival-weighted factor Q, or its Brownian variant), the
full surface V(x, s) by pinned concave majorants per level, and the general
policy value by quadrature of the excursion survival integral.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq, minimize_scalar

from .diffusion import LogPhiClass, Model, classify_log_phi
from .errors import (NoTangencyError, RewardError, TruncationError,
                     UnsupportedModelError, UnsupportedStructureError,
                     ValueInfiniteError)
from .majorant import Side, tangent_from_point, upper_concave_envelope
from .reward import (RewardSpec, TransformedReward, boundary_limits,
                     effective_reward, effective_reward_x, is_kink, transform)

_DEPTH_TOL_REL = 1e-6      # l* below this (relative to s) counts as "stop now"
_DEPTH_XATOL = 1e-8


class Case(str, enum.Enum):
    DEEP_STOP = "deep_stop"   # l* > 0: stop when the excursion is deep enough
    STOP_NOW = "stop_now"     # l* = 0: the diagonal point is in the stopping region
    WAVE = "wave"             # ride the maximum up to s_hat before stopping


class Region(enum.IntEnum):
    GAMMA = 0
    C1 = 1
    C2 = 2
    C3 = 3


@dataclass(frozen=True)
class DiagonalSolution:
    s: float
    v: float
    l_star: float
    case: Case
    x_star: Optional[float] = None  # stopping threshold at this level, when defined

    def __post_init__(self):
        if self.case is Case.DEEP_STOP and not self.l_star > 0.0:
            raise ValueError("deep-stop solution requires l_star > 0")


@dataclass
class ValueSurface:
    s_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray          # shape (len(x_grid), len(s_grid)); NaN where x > s
    regions: np.ndarray         # int Region labels; -1 where x > s
    s_minus_lstar: np.ndarray   # diagonal stopping boundary, NaN when not defined
    x_star: np.ndarray          # lower (origin-tangent) boundary, NaN when absent
    s_hat: Optional[float]
    s_lo: Optional[float]
    s_hi: Optional[float]
    diagonal: list


# ------------------------------------------------------------ diagonal value

def prop2_objective(model: Model, reward: RewardSpec, s: float, z: float,
                    log_phi: LogPhiClass = None) -> float:
    """Value of stopping at depth z at level s while acting optimally above.

    Returns phi(s)/phi(s-z) * Q(s; z) * h(s-z, s), with the Brownian
    variant of Q when log phi is linear.
    """
    model.require_inside(s)
    if z < 0.0 or s - z <= model.interval[0]:
        raise ValueError(f"depth z={z} leaves the state space at level s={s}")
    h = effective_reward(reward)
    if z == 0.0:
        return h(s, s)
    if log_phi is None:
        log_phi = classify_log_phi(model)
    x = s - z
    dF = model.F(s) - model.F(x)
    if log_phi is LogPhiClass.STRICTLY_CONVEX:
        num = model.Fp(s) * model.phi_p(s)
        den = model.phi_pp(s) * dF + num
        q_factor = num / den
    elif log_phi is LogPhiClass.LINEAR:
        num = model.Fp(s) * model.phi(s)
        den = (model.phi_p(s) - model.phi(s)) * dF + num
        q_factor = num / den
    else:
        raise UnsupportedModelError(
            "log phi is neither strictly convex nor linear; the explicit "
            "diagonal formula does not apply")
    return model.phi(s) / model.phi(x) * q_factor * h(x, s)


def _depth_objective(model: Model, reward: RewardSpec, s: float,
                     log_phi: LogPhiClass) -> Callable[[float], float]:
    # For a reward that does not depend on the maximum, the stopping boundary
    # is a fixed state, the survival factor vanishes, and the integral
    # representation collapses to the plain discounted-ratio map (no Q).
    if reward.depends_on_s:
        return lambda z: prop2_objective(model, reward, s, z, log_phi)
    h = effective_reward(reward)

    def plain(z):
        if z == 0.0:
            return h(s, s)
        return model.phi(s) / model.phi(s - z) * h(s - z, s)

    return plain


def optimal_excursion_depth(model: Model, reward: RewardSpec, s: float,
                            n_grid: int = 256, eps_b: float = None,
                            log_phi: LogPhiClass = None) -> tuple[float, float]:
    """Maximize the depth map over z in [0, s - l - eps]; returns (l_star, value)."""
    model.require_inside(s)
    l = model.interval[0]
    if eps_b is None:
        eps_b = 1e-8 * max(abs(s), 1.0)
    z_max = s - l - eps_b
    if not math.isfinite(z_max):
        # unbounded-below state space: the discounted ratio kills deep
        # stopping exponentially, so a generous finite cap suffices
        z_max = 100.0 * max(abs(s), 1.0)
    if z_max <= 0.0:
        return 0.0, effective_reward(reward)(s, s)
    if log_phi is None:
        log_phi = classify_log_phi(model)
    obj = _depth_objective(model, reward, s, log_phi)

    half = n_grid // 2
    lo_part = np.geomspace(z_max * 1e-9, z_max * 0.5, half)
    hi_part = z_max - np.geomspace(z_max * 1e-9, z_max * 0.5, half)[::-1]
    zs = np.unique(np.concatenate([[0.0], lo_part, hi_part]))
    vals = np.array([obj(z) for z in zs])
    if not np.all(np.isfinite(vals)):
        raise ValueInfiniteError(f"depth objective non-finite at level s={s}")
    i = int(np.argmax(vals))
    if i == len(zs) - 1 and vals[-1] > vals[-2] > vals[-3]:
        raise ValueInfiniteError(
            f"depth objective still increasing at the domain edge for s={s}")

    lo = zs[max(i - 1, 0)]
    hi = zs[min(i + 1, len(zs) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda z: -obj(z), bounds=(lo, hi), method="bounded",
                              options={"xatol": _DEPTH_XATOL * max(1.0, z_max)})
        z_best, v_best = float(res.x), float(-res.fun)
    else:
        z_best, v_best = float(zs[i]), float(vals[i])

    v0 = float(vals[0])
    if z_best <= _DEPTH_TOL_REL * max(abs(s), 1.0) or v_best <= v0 * (1.0 + 1e-12):
        if v0 >= v_best - 1e-12 * (1.0 + abs(v_best)):
            return 0.0, v0
    return z_best, v_best


# ----------------------------------------------------- origin tangency / s_hat

def _origin_tangency(model: Model, reward: RewardSpec, s: float,
                     xi_l: float = None, r_scan: float = None):
    """Tangency state x*(s) of the line from (0, xi_l) to H_s; None if absent."""
    if xi_l is None:
        xi_l = boundary_limits(model, reward, s).xi_l
    tr = transform(model, reward, s)
    if r_scan is None:
        r_scan = 4.0 * s
    l, r = model.interval
    hi = min(r_scan, r - 1e-12) if math.isfinite(r) else r_scan
    lo = l + 1e-8 * max(abs(s), 1.0)
    try:
        y_star, slope, degen = tangent_from_point(
            tr, (0.0, xi_l), side=Side.RIGHT,
            bracket=(model.F(lo), model.F(hi)))
    except NoTangencyError:
        return None
    if degen:
        return None
    return model.Finv(y_star)


def find_s_hat(model: Model, reward: RewardSpec, s_max: float,
               n_scan: int = 64, xtol: float = 1e-8) -> Optional[float]:
    """Level where s = x*(s), the upper edge of the ride-the-maximum block.

    Scans the origin-tangency curve for a sign change of s - x*(s).  For a
    reward that does not depend on s the stopping boundary is a constant
    state, which is returned as the (degenerate) fixed point.  Returns None
    when the crossing does not exist.
    """
    l, _ = model.interval
    lo = l + 1e-4 * max(abs(s_max), 1.0)
    ss = np.geomspace(max(lo, 1e-12), s_max, n_scan) if lo > 0 \
        else np.linspace(lo, s_max, n_scan)
    prev = None
    for s in ss:
        xs = _origin_tangency(model, reward, s)
        if xs is None:
            prev = None
            continue
        d = s - xs
        if prev is not None:
            s0, d0 = prev
            if d0 < 0.0 <= d:
                def resid(u):
                    xu = _origin_tangency(model, reward, u)
                    if xu is None:
                        return 1.0
                    return u - xu
                return brentq(resid, s0, s, xtol=xtol)
        prev = (s, d)
    if not reward.depends_on_s:
        # constant stopping boundary: fixed point of a constant map
        log_phi = classify_log_phi(model)
        for s in np.geomspace(s_max, max(lo, 1e-12), 8):
            l_star, _ = optimal_excursion_depth(model, reward, s, log_phi=log_phi)
            if l_star > 0.0:
                return s - l_star
    return None


def v_diag(model: Model, reward: RewardSpec, s: float,
           s_hat: Optional[float] = None, have_s_hat: bool = False,
           log_phi: LogPhiClass = None) -> DiagonalSolution:
    """Value V(s, s) on the diagonal with its case classification."""
    model.require_inside(s)
    if log_phi is None:
        log_phi = classify_log_phi(model)
    if not have_s_hat and reward.depends_on_s:
        s_hat = find_s_hat(model, reward, s_max=100.0 * max(s, 1.0))
    h = effective_reward(reward)
    if reward.depends_on_s and s_hat is not None and s < s_hat:
        v = model.psi(s) / model.psi(s_hat) * h(s_hat, s_hat)
        return DiagonalSolution(s=s, v=v, l_star=math.nan, case=Case.WAVE,
                                x_star=s_hat)
    l_star, v = optimal_excursion_depth(model, reward, s, log_phi=log_phi)
    if l_star > 0.0:
        return DiagonalSolution(s=s, v=v, l_star=l_star, case=Case.DEEP_STOP,
                                x_star=s - l_star)
    return DiagonalSolution(s=s, v=v, l_star=0.0, case=Case.STOP_NOW,
                            x_star=None)


# -------------------------------------------------------------- value surface

@dataclass(frozen=True)
class ColumnSolution:
    """Pinned majorant of one s-column, in transformed coordinates."""

    s: float
    diag: DiagonalSolution
    tr: TransformedReward
    xi_l: float
    y_top: float                 # F(s)
    w_top: float                 # V(s,s)/phi(s)
    y_right: float               # tangency adjoining F(s); = F(s) when l* = 0
    beta1: Optional[float]       # slope of the near-diagonal tangent (C1)
    y_left: float                # origin-tangent contact; 0 when absent
    beta2: Optional[float]       # slope of the origin tangent (C2)
    s_hat: Optional[float] = None

    def w(self, y: float) -> float:
        if self.diag.case is Case.WAVE:
            # value rides to s_hat: psi-linear in transformed coordinates
            return self.w_top * y / self.y_top
        if y >= self.y_right:
            return self.w_top + self.beta1 * (y - self.y_top) if self.beta1 is not None \
                else self.w_top
        if y <= self.y_left and self.beta2 is not None:
            return self.xi_l + self.beta2 * y
        return self.tr.H(y)

    def value_region(self, x: float) -> tuple[float, Region]:
        m = self.tr.model
        m.require_inside(x)
        if x > self.s * (1.0 + 1e-12):
            raise ValueError(f"x={x} above the running maximum s={self.s}")
        if self.diag.case is Case.WAVE:
            h = self.tr.h
            return m.psi(x) / m.psi(self.s_hat) * h(self.s_hat, self.s_hat), Region.C3
        y = m.F(min(x, self.s))
        val = m.phi(x) * self.w(y)
        if y > self.y_right * (1.0 + 1e-12):
            return val, Region.C1
        if self.beta2 is not None and y < self.y_left * (1.0 - 1e-12):
            return val, Region.C2
        return val, Region.GAMMA


def solve_column(model: Model, reward: RewardSpec, s: float,
                 diag: DiagonalSolution = None,
                 s_hat: Optional[float] = None, have_s_hat: bool = False,
                 log_phi: LogPhiClass = None,
                 validate: bool = True) -> ColumnSolution:
    if log_phi is None:
        log_phi = classify_log_phi(model)
    if not have_s_hat and reward.depends_on_s:
        s_hat = find_s_hat(model, reward, s_max=100.0 * max(s, 1.0))
    if diag is None:
        diag = v_diag(model, reward, s, s_hat=s_hat, have_s_hat=True,
                      log_phi=log_phi)
    tr = transform(model, reward, s)
    bl = boundary_limits(model, reward, s)
    y_top = model.F(s)
    w_top = diag.v / model.phi(s)

    if diag.case is Case.WAVE:
        return ColumnSolution(s=s, diag=diag, tr=tr, xi_l=bl.xi_l,
                              y_top=y_top, w_top=w_top, y_right=y_top,
                              beta1=None, y_left=0.0, beta2=None, s_hat=s_hat)

    l, _ = model.interval
    y_min = model.F(l + 1e-8 * max(abs(s), 1.0))

    if diag.case is Case.DEEP_STOP:
        y_right, beta1, _ = tangent_from_point(
            tr, (y_top, w_top), side=Side.LEFT, bracket=(y_min, y_top))
    else:
        y_right, beta1 = y_top, None

    y_left, beta2 = 0.0, None
    try:
        y_left, beta2, degen = tangent_from_point(
            tr, (0.0, bl.xi_l), side=Side.RIGHT, bracket=(y_min, y_right))
        if degen:
            y_left, beta2 = 0.0, None
    except NoTangencyError:
        pass

    col = ColumnSolution(s=s, diag=diag, tr=tr, xi_l=bl.xi_l, y_top=y_top,
                         w_top=w_top, y_right=y_right, beta1=beta1,
                         y_left=y_left, beta2=beta2, s_hat=s_hat)
    if validate:
        _validate_column(col)
    return col


def _validate_column(col: ColumnSolution, n: int = 128, rtol: float = 1e-6):
    """Check the half-interval continuation structure on a sample grid."""
    ys = np.geomspace(max(col.y_left, col.y_top * 1e-8), col.y_top, n)
    H = np.array([col.tr.H(y) for y in ys])
    W = np.array([col.w(y) for y in ys])
    scale = 1.0 + np.abs(W)
    if np.any(W < H - rtol * scale):
        raise UnsupportedStructureError(
            f"majorant dips below the reward at level s={col.s}: the "
            "continuation set is not a half-interval")
    # slope monotonicity (concavity) of the assembled majorant
    slopes = np.diff(W) / np.diff(ys)
    if np.any(np.diff(slopes) > rtol * (1.0 + np.abs(slopes[:-1]))):
        raise UnsupportedStructureError(
            f"assembled majorant is not concave at level s={col.s}")


def v_surface(model: Model, reward: RewardSpec, s: float, x,
              **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Value V(x, s) and region label for x at fixed maximum level s."""
    col = solve_column(model, reward, s, **kwargs)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    vals = np.empty_like(xs)
    regs = np.empty(len(xs), dtype=int)
    for i, xi in enumerate(xs):
        v, r = col.value_region(xi)
        vals[i] = v
        regs[i] = int(r)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(vals[0]), Region(int(regs[0]))
    return vals, regs


# --------------------------------------------------------- policy quadrature

def prop1_value(model: Model, reward: RewardSpec, policy: Callable[[float], float],
                s: float, rtol: float = 1e-8,
                r_cap: float = None, full_output: bool = False):
    """Value of an arbitrary threshold policy by survival-integral quadrature.

    `policy` maps a maximum level u to an excursion depth l_D(u) in
    [0, u - l]; depths at or beyond u - l mean "never stop during excursions
    from u" (ride), and a zero depth is an immediate stop (an atom of the
    maximum at that level).
    """
    model.require_inside(s)
    h = effective_reward(reward)
    l, r = model.interval
    scale = max(abs(s), 1.0)
    z_atol = 1e-9 * scale
    ride_margin = l + 1e-12 * scale

    def is_ride(u):
        return u - policy(u) <= ride_margin

    if policy(s) <= z_atol and not is_ride(s):
        out = (h(s, s), s, 1.0)
        return out if full_output else out[0]

    if r_cap is None:
        r_cap = 1e6 * scale
    m_cap = min(r_cap, r - 1e-12 * scale) if math.isfinite(r) else r_cap

    # locate the first atom level (depth hits zero) beyond s, if any
    m_atom = None
    scan = np.geomspace(s, m_cap, 4096) if s > 0 else np.linspace(s, m_cap, 4096)
    for a, b in zip(scan[:-1], scan[1:]):
        if policy(b) <= z_atol and not is_ride(b):
            lo_, hi_ = a, b
            for _ in range(200):
                mid = 0.5 * (lo_ + hi_)
                if policy(mid) <= z_atol and not is_ride(mid):
                    hi_ = mid
                else:
                    lo_ = mid
            m_atom = hi_
            break

    def compute(n, m_end):
        ms = np.geomspace(s, m_end, n) if s > 0 else np.linspace(s, m_end, n)
        # the atom level itself has zero depth; the integrand uses the
        # left-limit policy there so the excursion rate P stays finite
        eval_pts = ms.copy()
        if m_atom is not None:
            eval_pts[-1] = m_atom - 1e-10 * (m_atom - s + 1e-300) - 1e-300
        depths = np.array([policy(u) for u in eval_pts])
        x_low = eval_pts - depths
        ride = x_low <= ride_margin
        F_m = np.array([model.F(u) for u in ms])
        F_low = np.where(ride, 0.0,
                         [model.F(u) if u > l else 0.0 for u in x_low])
        Fp_m = np.array([model.Fp(u) for u in ms])
        P = Fp_m / (F_m - F_low)
        inner = cumulative_trapezoid(P, ms, initial=0.0)
        surv = np.exp(-inner)
        phi_s = model.phi(s)
        integrand = np.zeros(n)
        ok = ~ride & (depths > z_atol)
        if np.any(ok):
            phi_low = np.array([model.phi(u) for u in x_low[ok]])
            G = np.array([h(xl, u) for xl, u in zip(x_low[ok], ms[ok])])
            integrand[ok] = phi_s / phi_low * surv[ok] * P[ok] * G
        cum = cumulative_trapezoid(integrand, ms, initial=0.0)
        val = float(cum[-1])
        surv_end = float(surv[-1])
        if m_atom is not None:
            val += surv_end * phi_s / model.phi(m_atom) * h(m_atom, m_atom)
        return val, surv_end, ms, cum

    # coarse pass over the full range; without an atom, truncate where the
    # *integral* tail (not the survival factor, which can decay slower than
    # the integrand grows) is below the tolerance, and keep the coarse tail
    # estimate as a correction
    n = 4097
    tail = 0.0
    if m_atom is not None:
        m_end = m_atom
        val, surv_end, _, _ = compute(n, m_end)
    else:
        m_end = m_cap
        val, surv_end, ms, cum = compute(n, m_end)
        if surv_end > 1e-6:
            raise TruncationError(
                f"survival factor {surv_end:.3g} has not decayed before the "
                f"cap {m_cap:g}; increase r_cap")
        rem = cum[-1] - cum
        tol_tail = 0.01 * rtol * (1.0 + abs(float(cum[-1])))
        idx = np.nonzero(rem <= tol_tail)[0]
        k = max(int(idx[0]) if len(idx) else n - 1, 8)
        m_end = float(ms[k])
        tail = float(rem[k])
        val, surv_end, _, _ = compute(n, m_end)
        val += tail

    for _ in range(4):
        n = 2 * (n - 1) + 1
        val2, surv_end, _, _ = compute(n, m_end)
        val2 += tail
        converged = abs(val2 - val) <= rtol * (1.0 + abs(val2))
        val = val2
        if converged:
            break

    if full_output:
        return val, m_end, surv_end
    return val


def optimal_policy(model: Model, reward: RewardSpec, s0: float,
                   s_reach: float = None, n_knots: int = 160) -> Callable[[float], float]:
    """Piecewise-linear l*(u) curve usable as a simulation/quadrature policy.

    Rides (depth u - l) below s_hat when the level is in the wave block, and
    interpolates the optimal excursion depth on a geometric knot grid above.
    """
    model.require_inside(s0)
    log_phi = classify_log_phi(model)
    if s_reach is None:
        s_reach = 12.0 * s0
    s_hat = find_s_hat(model, reward, s_max=max(s_reach, 10.0 * s0)) \
        if reward.depends_on_s else None
    lo = s0 if s_hat is None else max(s0, s_hat)
    knots = np.geomspace(max(lo, 1e-12), s_reach, n_knots)
    depths = np.array([optimal_excursion_depth(model, reward, u,
                                               log_phi=log_phi)[0]
                       for u in knots])

    l = model.interval[0]
    # the depth curve is asymptotically linear in the level, so extrapolate
    # the last segment instead of clamping beyond the knot range
    tail_slope = (depths[-1] - depths[-2]) / (knots[-1] - knots[-2])

    def policy(u: float) -> float:
        if s_hat is not None and u < s_hat:
            return u - l  # ride: never stop below s_hat
        if u > knots[-1]:
            d = depths[-1] + tail_slope * (u - knots[-1])
            return min(max(d, 0.0), u - l)
        return float(np.interp(u, knots, depths))

    return policy


# ------------------------------------------------------------- smooth fit

def smooth_fit_value(model: Model, reward: RewardSpec, s: float, l: float) -> float:
    """Diagonal value from the smooth-fit representation at depth l."""
    model.require_inside(s)
    if l < 0.0:
        raise ValueError("depth must be nonnegative")
    h = effective_reward(reward)
    if l <= 1e-14 * max(abs(s), 1.0):
        return h(s, s)
    x = s - l
    model.require_inside(x)
    if is_kink(reward, x):
        raise RewardError(f"smooth-fit representation undefined at the kink x={x}")
    tr = transform(model, reward, s)
    P = model.Fp(s) / (model.F(s) - model.F(x))
    gamma = tr.slope_at_x(x) * model.Fp(x)          # (h/phi)'(x)
    slope_term = model.Fp(s) / model.Fp(x) * gamma
    return model.phi(s) / P * (slope_term + P * h(x, s) / model.phi(x))


# ------------------------------------------------------------- phase diagram

def _bisect_predicate(pred, s_true: float, s_false: float, tol: float) -> float:
    """Boundary between levels where pred holds and where it does not."""
    for _ in range(200):
        if abs(s_true - s_false) <= tol:
            break
        mid = 0.5 * (s_true + s_false)
        if pred(mid):
            s_true = mid
        else:
            s_false = mid
    return 0.5 * (s_true + s_false)


def phase_diagram(model: Model, reward: RewardSpec, s_grid,
                  x_per_s: int = 400, validate: bool = False) -> ValueSurface:
    """Sweep the diagonal then each column; extract boundary curves and scalars."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) < 0.0):
        raise ValueError("s_grid must be ascending")
    log_phi = classify_log_phi(model)
    s_max = float(s_grid[-1])
    s_hat = find_s_hat(model, reward, s_max=max(10.0 * s_max, s_max)) \
        if reward.depends_on_s else None

    l, _ = model.interval
    eps = 1e-6 * max(s_max, 1.0)
    x_grid = np.linspace(l + eps, s_max, x_per_s)

    nv = np.full((x_per_s, len(s_grid)), np.nan)
    nr = np.full((x_per_s, len(s_grid)), -1, dtype=int)
    s_minus_lstar = np.full(len(s_grid), np.nan)
    x_star = np.full(len(s_grid), np.nan)
    diagonal = []

    for j, s in enumerate(s_grid):
        col = solve_column(model, reward, s, s_hat=s_hat, have_s_hat=True,
                           log_phi=log_phi, validate=validate)
        diagonal.append(col.diag)
        if col.diag.case is Case.DEEP_STOP:
            s_minus_lstar[j] = s - col.diag.l_star
        elif col.diag.case is Case.STOP_NOW:
            s_minus_lstar[j] = s
        if col.beta2 is not None:
            x_star[j] = model.Finv(col.y_left)
        elif not reward.depends_on_s and col.diag.case is Case.DEEP_STOP:
            # constant stopping state: report it as the threshold curve
            x_star[j] = s - col.diag.l_star
        for i, x in enumerate(x_grid):
            if x > s:
                break
            v, reg = col.value_region(x)
            nv[i, j] = v
            nr[i, j] = int(reg)

    # s_lo: where the origin-tangent band (C2) disappears; s_hi: where a
    # positive optimal depth reappears above the diagonal stopping band.
    s_lo = s_hi = None
    has_c2 = [not math.isnan(v) for v in x_star]
    cases = [d.case for d in diagonal]
    tol = 1e-4 * s_max
    for j in range(len(s_grid) - 1):
        if cases[j] is not Case.WAVE and has_c2[j] and not has_c2[j + 1]:
            s_lo = _bisect_predicate(
                lambda u: _origin_tangency(model, reward, u) is not None,
                s_grid[j], s_grid[j + 1], tol)
            break
    for j in range(len(s_grid) - 1):
        if cases[j] is Case.STOP_NOW and cases[j + 1] is Case.DEEP_STOP:
            s_hi = _bisect_predicate(
                lambda u: optimal_excursion_depth(
                    model, reward, u, log_phi=log_phi)[0] == 0.0,
                s_grid[j], s_grid[j + 1], tol)
            break

    return ValueSurface(s_grid=s_grid, x_grid=x_grid, values=nv, regions=nr,
                        s_minus_lstar=s_minus_lstar, x_star=x_star,
                        s_hat=s_hat, s_lo=s_lo, s_hi=s_hi, diagonal=diagonal)
