"""Payoff data and its transformation into concave-majorant coordinates.

The effective reward is h(x, s) = g(x, s) - fbar(x, s), where fbar is the
discounted potential of the running income f.  Fixing the maximum level s
and composing with the inverse of F while dividing by phi turns the
stopping problem for h into a concave-majorant problem for H_s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diffusion import Model
from .errors import RewardError, ValueInfiniteError


@dataclass(frozen=True)
class RewardSpec:
    g: Callable[[float, float], float]
    g_x: Optional[Callable[[float, float], float]] = None
    f: Optional[Callable[[float, float], float]] = None
    fbar: Optional[Callable[[float, float], float]] = None
    fbar_x: Optional[Callable[[float, float], float]] = None
    monotone_in_s: bool = True
    depends_on_s: bool = True
    kinks: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if self.f is not None and self.fbar is None:
            raise RewardError("running income f supplied without its closed-form potential fbar")


def effective_reward(spec: RewardSpec) -> Callable[[float, float], float]:
    """h = g - fbar, with fbar identically zero when there is no running income."""
    if spec.fbar is None:
        return spec.g
    g, fbar = spec.g, spec.fbar
    return lambda x, s: g(x, s) - fbar(x, s)


def effective_reward_x(spec: RewardSpec) -> Optional[Callable[[float, float], float]]:
    """Partial derivative of h in x, when the pieces are available analytically."""
    if spec.g_x is None:
        return None
    if spec.fbar is None:
        return spec.g_x
    if spec.fbar_x is None:
        return None
    g_x, fbar_x = spec.g_x, spec.fbar_x
    return lambda x, s: g_x(x, s) - fbar_x(x, s)


def is_kink(spec: RewardSpec, x: float, atol: float = 1e-12) -> bool:
    return any(abs(x - k) <= atol * max(1.0, abs(k)) for k in spec.kinks)


# ---------------------------------------------------------------- built-ins

def power_sum_reward(a: float = 0.5, b: float = 1.0, k: float = 0.5, K: float = 5.0) -> RewardSpec:
    """g(x, s) = s^a + k x^b - K."""
    def g(x, s): return s**a + k * x**b - K
    def g_x(x, s): return k * b * x**(b - 1.0)
    return RewardSpec(g=g, g_x=g_x, monotone_in_s=True, depends_on_s=True,
                      name="power_sum")


def lookback_reward(k: float = 0.5) -> RewardSpec:
    """g(x, s) = s - k x with k in [0, 1]."""
    if not 0.0 <= k <= 1.0:
        raise RewardError(f"lookback coefficient k must lie in [0, 1], got {k}")
    def g(x, s): return s - k * x
    def g_x(x, s): return -k
    return RewardSpec(g=g, g_x=g_x, monotone_in_s=True, depends_on_s=True,
                      name="lookback")


def put_reward(K: float = 5.0) -> RewardSpec:
    """g(x, s) = (K - x)^+; independent of the running maximum."""
    def g(x, s): return max(K - x, 0.0)
    def g_x(x, s): return -1.0 if x < K else 0.0  # right derivative at the kink
    return RewardSpec(g=g, g_x=g_x, monotone_in_s=True, depends_on_s=False,
                      kinks=(K,), name="put")


def russian_reward() -> RewardSpec:
    """g(x, s) = s (lookback with k = 0)."""
    def g(x, s): return s
    def g_x(x, s): return 0.0
    return RewardSpec(g=g, g_x=g_x, monotone_in_s=True, depends_on_s=True,
                      name="russian")


BUILTIN_REWARDS = {
    "power_sum": power_sum_reward,
    "lookback": lookback_reward,
    "put": put_reward,
    "russian": russian_reward,
}


# ------------------------------------------------------------ transformation

@dataclass(frozen=True)
class TransformedReward:
    """H_s(y) = h(Finv(y), s) / phi(Finv(y)) at a fixed maximum level s."""

    model: Model
    spec: RewardSpec
    s: float
    h: Callable[[float, float], float] = field(repr=False)
    h_x: Optional[Callable[[float, float], float]] = field(repr=False, default=None)

    def __call__(self, y: float) -> float:
        return self.H(y)

    def H(self, y: float) -> float:
        if y <= 0.0:
            raise RewardError(f"transformed abscissa must be positive, got {y}")
        x = self.model.Finv(y)
        return self.h(x, self.s) / self.model.phi(x)

    def H_at_x(self, x: float) -> float:
        return self.h(x, self.s) / self.model.phi(x)

    def slope_at_x(self, x: float) -> float:
        """(h/phi)'(x) / F'(x): the H-slope at y = F(x)."""
        m = self.model
        phi = m.phi(x)
        if self.h_x is not None:
            hp = self.h_x(x, self.s)
        else:
            # centered difference, falling back to one-sided at a kink
            dx = 1e-6 * max(abs(x), 1.0)
            hp = (self.h(x + dx, self.s) - self.h(x - dx, self.s)) / (2.0 * dx)
        num = hp / phi - self.h(x, self.s) * m.phi_p(x) / phi**2
        return num / m.Fp(x)

    def Hprime(self, y: float) -> float:
        return self.slope_at_x(self.model.Finv(y))


def transform(model: Model, spec: RewardSpec, s: float) -> TransformedReward:
    model.require_inside(s)
    return TransformedReward(model=model, spec=spec, s=s,
                             h=effective_reward(spec),
                             h_x=effective_reward_x(spec))


# ---------------------------------------------------------- boundary limits

@dataclass(frozen=True)
class BoundaryLimits:
    xi_l: float
    xi_r: float
    converged_l: bool
    converged_r: bool


def _aitken(v) -> float:
    d1 = v[1] - v[0]
    d2 = v[2] - v[1]
    den = d2 - d1
    if den == 0.0:
        return float(v[2])
    return float(v[2] - d2 * d2 / den)


def _stabilized_limit(values: np.ndarray, rel_tol: float = 1e-8) -> tuple[float, bool]:
    """Limit of a refining sequence: Aitken extrapolation of the tail, with a
    plain stabilization fallback; the supremum when neither settles."""
    sup = float(np.max(values))
    tail = values[-10:]
    a1 = _aitken(tail[-3:])
    a2 = _aitken(tail[-4:-1])
    spread = float(np.max(tail[-8:]) - np.min(tail[-8:]))
    if math.isfinite(a1) and abs(a1 - a2) <= rel_tol * (1.0 + abs(a1)):
        lim, converged = max(a1, 0.0), True
    elif spread <= rel_tol * (1.0 + abs(float(tail[-1]))):
        lim, converged = max(float(tail[-1]), 0.0), True
    else:
        lim, converged = sup, False
    if lim <= 1e-12 * max(sup, 0.0):
        lim = 0.0  # snap a vanishing limit to exactly zero
    return lim, converged


def boundary_limits(model: Model, spec: RewardSpec, s: float,
                    n: int = 64, r_cap: float = None) -> BoundaryLimits:
    """Growth limits of h+/phi at the left boundary and h+/psi at the right.

    Estimated on geometric sequences approaching each boundary; a detected
    divergence means the value function is infinite (ill-posed problem).
    """
    model.require_inside(s)
    h = effective_reward(spec)
    l, r = model.spec.interval
    scale = max(abs(s), 1.0)

    # left boundary
    start = l + 0.5 * (s - l)
    ratios = np.geomspace(1.0, 1e-12, n)
    xs_l = l + (start - l) * ratios
    vals_l = np.array([max(h(x, s), 0.0) / model.phi(x) for x in xs_l])
    xi_l, conv_l = _stabilized_limit(vals_l)

    # right boundary
    if r_cap is None:
        r_cap = 1e6 * scale
    hi = min(r_cap, r) if math.isfinite(r) else r_cap
    xs_r = np.geomspace(max(s, l + 1e-6 * scale), hi, n)
    vals_r = np.array([max(h(x, s), 0.0) / model.psi(x) for x in xs_r])
    xi_r, conv_r = _stabilized_limit(vals_r)

    for name, vals in (("left", vals_l), ("right", vals_r)):
        tail = vals[-8:]
        if np.all(np.diff(tail) > 0.0) and tail[-1] > 1e6 * (1.0 + abs(vals[0])):
            raise ValueInfiniteError(
                f"{name} boundary growth limit diverges; value function is infinite")

    return BoundaryLimits(xi_l=xi_l, xi_r=xi_r, converged_l=conv_l, converged_r=conv_r)
