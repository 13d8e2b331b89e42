"""Diffusion models and their fundamental discounted-hitting solutions.

A model carries the increasing solution psi and decreasing solution phi of
(A - q)v = 0, where A is the generator (1/2) sigma^2 v'' + mu v', together
with the strictly increasing ratio F = psi/phi and its inverse.  Built-in
closed forms cover geometric and arithmetic Brownian motion; anything else
is supplied by the caller as Custom callables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ModelError


class Kind(str, enum.Enum):
    GBM = "gbm"
    ABM = "abm"
    BM = "bm"
    CUSTOM = "custom"


class LogPhiClass(str, enum.Enum):
    STRICTLY_CONVEX = "strictly_convex"
    LINEAR = "linear"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ModelSpec:
    kind: Kind
    mu: float
    sigma: float
    q: float
    interval: tuple[float, float] = None  # type: ignore[assignment]
    anchor: Optional[float] = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.sigma <= 0.0:
            raise ModelError(f"sigma must be strictly positive, got {self.sigma}")
        if self.q < 0.0:
            raise ModelError(f"discount rate must be nonnegative, got {self.q}")
        interval = self.interval
        if interval is None:
            interval = (0.0, math.inf) if kind is Kind.GBM else (-math.inf, math.inf)
        interval = (float(interval[0]), float(interval[1]))
        if not interval[0] < interval[1]:
            raise ModelError(f"interval must satisfy l < r, got {interval}")
        if kind is Kind.GBM and interval[0] < 0.0:
            raise ModelError("GBM state space is (0, inf)")
        object.__setattr__(self, "interval", interval)
        if self.anchor is None:
            default = 1.0 if kind is Kind.GBM else 0.0
            object.__setattr__(self, "anchor", default)
        if not interval[0] < self.anchor < interval[1]:
            raise ModelError(f"anchor {self.anchor} outside interval {interval}")


@dataclass(frozen=True)
class Model:
    """Immutable bundle of evaluable fundamentals; all callables are pure."""

    spec: ModelSpec
    psi: Callable[[float], float]
    phi: Callable[[float], float]
    psi_p: Callable[[float], float]
    phi_p: Callable[[float], float]
    phi_pp: Callable[[float], float]
    F: Callable[[float], float]
    Fp: Callable[[float], float]
    Finv: Callable[[float], float]
    gamma0: Optional[float] = None  # GBM only
    gamma1: Optional[float] = None

    @property
    def interval(self) -> tuple[float, float]:
        return self.spec.interval

    @property
    def q(self) -> float:
        return self.spec.q

    def require_inside(self, x: float) -> None:
        l, r = self.spec.interval
        if not (l < x < r):
            raise ModelError(f"state {x} outside the open interval ({l}, {r})")

    def working_interval(self, s_max: float, eps_b: float = None, r_cap: float = None):
        """Numeric scan interval [l + eps_b, r_cap] used by grid-based routines."""
        l, r = self.spec.interval
        scale = abs(s_max) if s_max else 1.0
        if eps_b is None:
            eps_b = 1e-8 * scale
        if r_cap is None:
            r_cap = 10.0 * s_max
        lo = l + eps_b
        hi = min(r_cap, r) if math.isfinite(r) else r_cap
        return lo, hi


def _gbm_exponents(mu: float, sigma: float, q: float) -> tuple[float, float]:
    # roots of (1/2) sigma^2 g (g - 1) + mu g - q = 0
    a = 2.0 * mu / sigma**2 - 1.0
    disc = a * a + 8.0 * q / sigma**2
    if disc <= 0.0:
        raise ModelError("non-positive discriminant for GBM exponents")
    root = math.sqrt(disc)
    g0 = 0.5 * (-a - root)
    g1 = 0.5 * (-a + root)
    return g0, g1


def make_model(
    spec: ModelSpec,
    *,
    psi: Callable = None,
    phi: Callable = None,
    psi_p: Callable = None,
    phi_p: Callable = None,
    phi_pp: Callable = None,
) -> Model:
    """Wire up the fundamental solutions for a model spec.

    Custom models must supply psi, phi and their derivatives as closed-form
    callables; built-ins ignore those arguments.
    """
    kind = spec.kind
    if kind is Kind.GBM:
        return _make_gbm(spec)
    if kind in (Kind.ABM, Kind.BM):
        return _make_bm(spec)
    if kind is Kind.CUSTOM:
        missing = [n for n, f in
                   [("psi", psi), ("phi", phi), ("psi_p", psi_p),
                    ("phi_p", phi_p), ("phi_pp", phi_pp)] if f is None]
        if missing:
            raise ModelError(f"Custom model missing callables: {', '.join(missing)}")
        return _make_custom(spec, psi, phi, psi_p, phi_p, phi_pp)
    raise ModelError(f"unknown model kind {kind!r}")


def _make_gbm(spec: ModelSpec) -> Model:
    if spec.q <= 0.0:
        raise ModelError("GBM value solving requires q > 0")
    g0, g1 = _gbm_exponents(spec.mu, spec.sigma, spec.q)
    x0 = spec.anchor
    d = g1 - g0

    def psi(x): return (x / x0) ** g1
    def phi(x): return (x / x0) ** g0
    def psi_p(x): return g1 * (x / x0) ** (g1 - 1.0) / x0
    def phi_p(x): return g0 * (x / x0) ** (g0 - 1.0) / x0
    def phi_pp(x): return g0 * (g0 - 1.0) * (x / x0) ** (g0 - 2.0) / x0**2
    def F(x): return (x / x0) ** d
    def Fp(x): return d * (x / x0) ** (d - 1.0) / x0
    def Finv(y): return x0 * y ** (1.0 / d)

    return Model(spec, psi, phi, psi_p, phi_p, phi_pp, F, Fp, Finv,
                 gamma0=g0, gamma1=g1)


def _make_bm(spec: ModelSpec) -> Model:
    mu, sig, q, x0 = spec.mu, spec.sigma, spec.q, spec.anchor
    if spec.kind is Kind.BM and mu != 0.0:
        raise ModelError("BM has zero drift; use ABM for a drifted Brownian motion")
    if q == 0.0:
        # Only the scale function is meaningful; psi/phi queries are illegal.
        return _make_bm_scale_only(spec)
    root = math.sqrt(mu * mu + 2.0 * q * sig * sig)
    lam_p = (-mu + root) / sig**2
    lam_m = (-mu - root) / sig**2

    def psi(x): return math.exp(lam_p * (x - x0))
    def phi(x): return math.exp(lam_m * (x - x0))
    def psi_p(x): return lam_p * math.exp(lam_p * (x - x0))
    def phi_p(x): return lam_m * math.exp(lam_m * (x - x0))
    def phi_pp(x): return lam_m * lam_m * math.exp(lam_m * (x - x0))
    d = lam_p - lam_m
    def F(x): return math.exp(d * (x - x0))
    def Fp(x): return d * math.exp(d * (x - x0))
    def Finv(y): return x0 + math.log(y) / d

    return Model(spec, psi, phi, psi_p, phi_p, phi_pp, F, Fp, Finv)


def _make_bm_scale_only(spec: ModelSpec) -> Model:
    mu, sig, x0 = spec.mu, spec.sigma, spec.anchor

    def _no_value(*_a):
        raise ModelError("q = 0: only scale-function queries are legal")

    if mu == 0.0:
        def F(x): return x - x0
        def Fp(x): return 1.0
        def Finv(y): return y + x0
    else:
        c = 2.0 * mu / sig**2
        def F(x): return (1.0 - math.exp(-c * (x - x0))) / c
        def Fp(x): return math.exp(-c * (x - x0))
        def Finv(y): return x0 - math.log(1.0 - c * y) / c

    return Model(spec, _no_value, _no_value, _no_value, _no_value, _no_value,
                 F, Fp, Finv)


def _make_custom(spec, psi, phi, psi_p, phi_p, phi_pp) -> Model:
    def F(x): return psi(x) / phi(x)

    def Fp(x):
        p = phi(x)
        return (psi_p(x) * p - psi(x) * phi_p(x)) / (p * p)

    l, r = spec.interval
    anchor = spec.anchor

    def Finv(y, _F=F):
        # bracket by geometric/linear expansion from the anchor, then brentq
        lo = hi = anchor
        step = max(abs(anchor), 1.0) * 0.5
        for _ in range(200):
            if _F(lo) <= y:
                break
            lo = max(lo - step, l + (anchor - l) * 1e-14) if math.isfinite(l) else lo - step
            step *= 2.0
        step = max(abs(anchor), 1.0) * 0.5
        for _ in range(200):
            if _F(hi) >= y:
                break
            hi = min(hi + step, r - 1e-14 * max(abs(r), 1.0)) if math.isfinite(r) else hi + step
            step *= 2.0
        if _F(lo) > y or _F(hi) < y:
            raise ModelError(f"value {y} outside the F-image of the interval")
        return brentq(lambda x: _F(x) - y, lo, hi, xtol=1e-14, rtol=1e-14)

    return Model(spec, psi, phi, psi_p, phi_p, phi_pp, F, Fp, Finv)


def eval_fundamentals(model: Model, x: float) -> tuple[float, float, float, float, float]:
    """Return (psi, phi, psi', phi', phi'') at x, validating the state."""
    model.require_inside(x)
    vals = (model.psi(x), model.phi(x), model.psi_p(x),
            model.phi_p(x), model.phi_pp(x))
    if not all(math.isfinite(v) for v in vals):
        raise ModelError(f"non-finite fundamental solution at x={x}")
    return vals


def classify_log_phi(model: Model, *, x_lo: float = None, x_hi: float = None,
                     n: int = 257, tol: float = 1e-10) -> LogPhiClass:
    """Classify the curvature of log phi on a dense sample of the working interval.

    Strict convexity selects the Q factor in the diagonal formula; linearity
    (the Brownian family, phi exponential) selects Q-tilde.
    """
    l, r = model.spec.interval
    if x_lo is None or x_hi is None:
        anchor = model.spec.anchor
        scale = max(abs(anchor), 1.0)
        if x_lo is None:
            x_lo = anchor - 4.0 * scale if math.isinf(l) else l + 1e-6 * scale
        if x_hi is None:
            x_hi = anchor + 4.0 * scale if math.isinf(r) else \
                min(anchor + 4.0 * scale, r - 1e-6 * scale)
    xs = np.linspace(x_lo, x_hi, n)
    phi = np.array([model.phi(x) for x in xs])
    phi_p = np.array([model.phi_p(x) for x in xs])
    phi_pp = np.array([model.phi_pp(x) for x in xs])
    curv = phi_pp / phi - (phi_p / phi) ** 2  # (log phi)''
    scale = np.maximum((phi_p / phi) ** 2, 1.0)
    rel = curv / scale
    if np.all(rel > tol):
        return LogPhiClass.STRICTLY_CONVEX
    if np.all(np.abs(rel) <= tol):
        return LogPhiClass.LINEAR
    return LogPhiClass.INDETERMINATE
