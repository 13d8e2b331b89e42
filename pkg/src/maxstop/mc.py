"""Monte Carlo oracle for threshold stopping policies on (X, S).

Paths are simulated with exact Gaussian increments (log-Euler for geometric
Brownian motion, plain Euler for the arithmetic case, both of which are exact
between grid times for constant coefficients); the running maximum is tracked
at grid resolution.  The random number generator is a counter-based Philox
4x32-10, so every path's stream is a pure function of (seed, path index,
step index) and estimates are bit-identical across runs and thread counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numba as nb
import numpy as np

from .diffusion import Kind, Model
from .errors import ModelError, UnsupportedModelError
from .reward import RewardSpec, effective_reward

# Broadie-Glasserman-Kou barrier-shift constant: -zeta(1/2)/sqrt(2*pi)
_BGK_BETA = 0.5826


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    dt: float
    t_max: float
    seed: int
    antithetic: bool = False
    continuity_correction: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must be at least dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_stopped: int
    n_censored: int
    dt_warning: bool = False

    def __post_init__(self):
        if self.stderr < 0.0:
            raise ValueError("stderr must be nonnegative")

    @property
    def n_paths(self) -> int:
        return self.n_stopped + self.n_censored

    def z_score(self, reference: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / self.stderr


# --------------------------------------------------------------- RNG kernel

@nb.njit(inline="always")
def _philox4(c0, c1, c2, c3, k0, k1):
    M0 = np.uint64(0xD2511F53)
    M1 = np.uint64(0xCD9E8D57)
    W0 = np.uint32(0x9E3779B9)
    W1 = np.uint32(0xBB67AE85)
    for _ in range(10):
        p0 = np.uint64(c0) * M0
        p1 = np.uint64(c2) * M1
        h0 = np.uint32(p0 >> np.uint64(32))
        l0 = np.uint32(p0)
        h1 = np.uint32(p1 >> np.uint64(32))
        l1 = np.uint32(p1)
        c0 = np.uint32(h1 ^ c1 ^ k0)
        c1 = l1
        c2 = np.uint32(h0 ^ c3 ^ k1)
        c3 = l0
        k0 = np.uint32(k0 + W0)
        k1 = np.uint32(k1 + W1)
    return c0, c1, c2, c3


_TWOPI = 2.0 * math.pi
_INV32 = 1.0 / 4294967296.0


@nb.njit(inline="always")
def _normals4(i, j, seed):
    r0, r1, r2, r3 = _philox4(
        np.uint32(j), np.uint32(j >> np.uint64(32)),
        np.uint32(i), np.uint32(i >> np.uint64(32)),
        np.uint32(seed), np.uint32(seed >> np.uint64(32)))
    u1 = (r0 + 0.5) * _INV32
    u2 = (r1 + 0.5) * _INV32
    u3 = (r2 + 0.5) * _INV32
    u4 = (r3 + 0.5) * _INV32
    rad1 = math.sqrt(-2.0 * math.log(u1))
    rad2 = math.sqrt(-2.0 * math.log(u3))
    a = _TWOPI * u2
    b = _TWOPI * u4
    return rad1 * math.cos(a), rad1 * math.sin(a), rad2 * math.cos(b), rad2 * math.sin(b)


@nb.njit(inline="always")
def _barrier_at(ws, w_lo, inv_step, tab):
    # linear interpolation on the uniform working-coordinate grid; clamp ends
    t = (ws - w_lo) * inv_step
    if t <= 0.0:
        return tab[0]
    n = tab.shape[0]
    if t >= n - 1:
        return tab[n - 1]
    k = int(t)
    fr = t - k
    return tab[k] * (1.0 - fr) + tab[k + 1] * fr


@nb.njit(cache=True)
def _policy_kernel(n_paths, n_steps, drift, sdt, wx0, ws0,
                   w_lo, inv_step, tabs, seed, antithetic,
                   out_tau, out_wx, out_ws, out_stop):
    """Run every policy (row of `tabs`) on the same increments per path."""
    n_pol = tabs.shape[0]
    for ipath in range(n_paths):
        if antithetic:
            stream = np.uint64(ipath // 2)
            sign = 1.0 if ipath % 2 == 0 else -1.0
        else:
            stream = np.uint64(ipath)
            sign = 1.0
        for p in range(n_pol):
            wx = wx0
            ws = ws0
            tau = n_steps
            stopped = False
            j = 0
            while j < n_steps:
                z0, z1, z2, z3 = _normals4(stream, np.uint64(j), seed)
                wx += drift + sdt * (sign * z0)
                if wx > ws:
                    ws = wx
                if wx <= _barrier_at(ws, w_lo, inv_step, tabs[p]):
                    tau = j + 1
                    stopped = True
                    break
                wx += drift + sdt * (sign * z1)
                if wx > ws:
                    ws = wx
                if wx <= _barrier_at(ws, w_lo, inv_step, tabs[p]):
                    tau = j + 2
                    stopped = True
                    break
                wx += drift + sdt * (sign * z2)
                if wx > ws:
                    ws = wx
                if wx <= _barrier_at(ws, w_lo, inv_step, tabs[p]):
                    tau = j + 3
                    stopped = True
                    break
                wx += drift + sdt * (sign * z3)
                if wx > ws:
                    ws = wx
                if wx <= _barrier_at(ws, w_lo, inv_step, tabs[p]):
                    tau = j + 4
                    stopped = True
                    break
                j += 4
            out_tau[p, ipath] = tau
            out_wx[p, ipath] = wx
            out_ws[p, ipath] = ws
            out_stop[p, ipath] = stopped


@nb.njit(cache=True)
def _hitting_kernel(n_paths, n_steps, drift, sdt, wx0, wz, upward, seed,
                    out_tau, out_stop):
    for ipath in range(n_paths):
        stream = np.uint64(ipath)
        wx = wx0
        tau = n_steps
        stopped = False
        j = 0
        while j < n_steps:
            z0, z1, z2, z3 = _normals4(stream, np.uint64(j), seed)
            for k in range(4):
                if k == 0:
                    z = z0
                elif k == 1:
                    z = z1
                elif k == 2:
                    z = z2
                else:
                    z = z3
                wx += drift + sdt * z
                if (upward and wx >= wz) or ((not upward) and wx <= wz):
                    tau = j + k + 1
                    stopped = True
                    break
            if stopped:
                break
            j += 4
        out_tau[ipath] = tau
        out_stop[ipath] = stopped


# ----------------------------------------------------------- path machinery

def _working_coords(model: Model):
    """(to_w, from_w, drift-per-unit-time, volatility) in simulation coordinates."""
    spec = model.spec
    if spec.kind is Kind.GBM:
        return (math.log, math.exp, spec.mu - 0.5 * spec.sigma**2, spec.sigma)
    if spec.kind in (Kind.ABM, Kind.BM):
        return (lambda x: x, lambda w: w, spec.mu, spec.sigma)
    raise UnsupportedModelError(
        "Monte Carlo simulation supports the built-in constant-coefficient "
        "models only")


def _as_policy(policy) -> Callable[[float], float]:
    if callable(policy):
        return policy
    depth = float(policy)
    return lambda s: depth


def _barrier_table(model: Model, policy, s0: float, cfg: MCConfig,
                   n_tab: int = 4097):
    """Sampled stopping barrier in working coordinates, uniform in w(S)."""
    to_w, from_w, drift, sigma = _working_coords(model)
    pol = _as_policy(policy)
    ws0 = to_w(s0)
    span = 6.0 * sigma * math.sqrt(cfg.t_max) + max(drift, 0.0) * cfg.t_max + 1.0
    w_hi = ws0 + span
    ws = np.linspace(ws0, w_hi, n_tab)
    l_bound = model.interval[0]
    shift = _BGK_BETA * sigma * math.sqrt(cfg.dt) if cfg.continuity_correction else 0.0
    tab = np.empty(n_tab)
    for i, w in enumerate(ws):
        s = from_w(w)
        b = s - pol(s)
        if b <= l_bound:
            tab[i] = -1e308  # ride: never stop during excursions from s
        else:
            # shift the monitored barrier up so discrete monitoring matches
            # the continuous crossing to O(dt)
            tab[i] = to_w(b) + shift
    inv_step = (n_tab - 1) / (w_hi - ws0)
    return ws0, inv_step, tab


def _payoffs(model: Model, reward: RewardSpec, cfg: MCConfig,
             tau, wx, ws, stop) -> np.ndarray:
    _, from_w, _, sigma = _working_coords(model)
    h = effective_reward(reward)
    q = model.q
    # the grid-sampled maximum underestimates the continuous one by about
    # beta sigma sqrt(dt) in working coordinates; shift it back up so
    # maximum-dependent payoffs are unbiased to O(dt)
    shift = _BGK_BETA * sigma * math.sqrt(cfg.dt) \
        if cfg.continuity_correction else 0.0
    pay = np.zeros(len(tau))
    idx = np.nonzero(stop)[0]
    for i in idx:
        x = from_w(wx[i])
        s = from_w(ws[i] + shift)
        pay[i] = math.exp(-q * tau[i] * cfg.dt) * h(x, max(s, x))
    return pay


def _estimate(pay: np.ndarray, stop: np.ndarray, cfg: MCConfig) -> MCEstimate:
    n = len(pay)
    n_stopped = int(np.count_nonzero(stop))
    if cfg.antithetic and n % 2 == 0:
        pair = 0.5 * (pay[0::2] + pay[1::2])
        mean = float(np.mean(pair))
        var = float(np.var(pair, ddof=1)) if len(pair) > 1 else 0.0
        stderr = math.sqrt(var / len(pair))
    else:
        mean = float(np.mean(pay))
        var = float(np.var(pay, ddof=1)) if n > 1 else 0.0
        stderr = math.sqrt(var / n)
    return MCEstimate(mean=mean, stderr=stderr, n_stopped=n_stopped,
                      n_censored=n - n_stopped,
                      dt_warning=(n_stopped < 0.99 * n))


# ------------------------------------------------------------- entry points

def simulate_policy(model: Model, reward: RewardSpec, policy,
                    x0: float, s0: float, cfg: MCConfig) -> MCEstimate:
    """Estimate E[e^{-q tau} h(X_tau, S_tau)] for a threshold policy.

    `policy` is either a callable s -> l_D(s) or a constant depth.  Stopping
    occurs at the first grid time with S - X >= l_D(S); paths still running
    at t_max are censored and contribute zero.
    """
    model.require_inside(x0)
    model.require_inside(s0)
    if x0 > s0:
        raise ValueError("initial state must satisfy x0 <= s0")
    pol = _as_policy(policy)
    h = effective_reward(reward)
    if s0 - x0 >= pol(s0) and s0 - pol(s0) > model.interval[0]:
        # already inside the stopping region: tau = 0, deterministic payoff
        return MCEstimate(mean=h(x0, s0), stderr=0.0,
                          n_stopped=cfg.n_paths, n_censored=0)
    to_w, _, drift_rate, sigma = _working_coords(model)
    w_lo, inv_step, tab = _barrier_table(model, pol, s0, cfg)
    tabs = tab[None, :]
    n, n_steps = cfg.n_paths, cfg.n_steps
    out_tau = np.empty((1, n), dtype=np.int64)
    out_wx = np.empty((1, n))
    out_ws = np.empty((1, n))
    out_stop = np.zeros((1, n), dtype=np.bool_)
    _policy_kernel(n, n_steps, drift_rate * cfg.dt, sigma * math.sqrt(cfg.dt),
                   to_w(x0), to_w(s0), w_lo, inv_step, tabs,
                   np.uint64(cfg.seed), cfg.antithetic,
                   out_tau, out_wx, out_ws, out_stop)
    pay = _payoffs(model, reward, cfg, out_tau[0], out_wx[0], out_ws[0],
                   out_stop[0])
    return _estimate(pay, out_stop[0], cfg)


def hitting_time_check(model: Model, x: float, z: float,
                       cfg: MCConfig) -> MCEstimate:
    """MC estimate of E^x[e^{-q T_z}], to compare with psi(x)/psi(z) (x <= z)
    or phi(x)/phi(z) (x >= z)."""
    model.require_inside(x)
    model.require_inside(z)
    if x == z:
        return MCEstimate(mean=1.0, stderr=0.0, n_stopped=cfg.n_paths,
                          n_censored=0)
    to_w, _, drift_rate, sigma = _working_coords(model)
    upward = z > x
    shift = _BGK_BETA * sigma * math.sqrt(cfg.dt) if cfg.continuity_correction else 0.0
    wz = to_w(z) - shift if upward else to_w(z) + shift
    n, n_steps = cfg.n_paths, cfg.n_steps
    out_tau = np.empty(n, dtype=np.int64)
    out_stop = np.zeros(n, dtype=np.bool_)
    _hitting_kernel(n, n_steps, drift_rate * cfg.dt, sigma * math.sqrt(cfg.dt),
                    to_w(x), wz, upward, np.uint64(cfg.seed),
                    out_tau, out_stop)
    pay = np.where(out_stop, np.exp(-model.q * out_tau * cfg.dt), 0.0)
    return _estimate(pay, out_stop, cfg)


@dataclass(frozen=True)
class DominanceReport:
    """Paired-path comparison of policies against the first (reference) one."""

    estimates: tuple            # MCEstimate per policy
    diff_means: tuple           # mean(pay_ref - pay_p), p = 1..k-1
    diff_stderrs: tuple
    z_scores: tuple             # positive: reference dominates policy p
    ranking: tuple              # policy indices sorted by estimated mean, best first
    inconclusive: bool          # some comparison is within 3 sigma

    @property
    def reference_dominated(self) -> bool:
        """True when some perturbation beats the reference at the 3-sigma level."""
        return any(z < -3.0 for z in self.z_scores)


def policy_dominance_test(model: Model, reward: RewardSpec,
                          policies: Sequence, x0: float, s0: float,
                          cfg: MCConfig) -> DominanceReport:
    """Compare policies on common random numbers; the first is the reference."""
    if len(policies) < 2:
        raise ValueError("need at least two policies to compare")
    model.require_inside(x0)
    model.require_inside(s0)
    if x0 > s0:
        raise ValueError("initial state must satisfy x0 <= s0")
    to_w, _, drift_rate, sigma = _working_coords(model)
    pols = [_as_policy(p) for p in policies]
    h = effective_reward(reward)
    k = len(pols)
    n, n_steps = cfg.n_paths, cfg.n_steps

    tables = [_barrier_table(model, p, s0, cfg) for p in pols]
    w_lo = tables[0][0]
    inv_step = tables[0][1]
    tabs = np.stack([t[2] for t in tables])

    pays = np.empty((k, n))
    stops = np.zeros((k, n), dtype=np.bool_)
    immediate = [s0 - x0 >= p(s0) and s0 - p(s0) > model.interval[0]
                 for p in pols]
    run = [p for p in range(k) if not immediate[p]]
    if run:
        sub = np.stack([tabs[p] for p in run])
        out_tau = np.empty((len(run), n), dtype=np.int64)
        out_wx = np.empty((len(run), n))
        out_ws = np.empty((len(run), n))
        out_stop = np.zeros((len(run), n), dtype=np.bool_)
        _policy_kernel(n, n_steps, drift_rate * cfg.dt,
                       sigma * math.sqrt(cfg.dt), to_w(x0), to_w(s0),
                       w_lo, inv_step, sub, np.uint64(cfg.seed),
                       cfg.antithetic, out_tau, out_wx, out_ws, out_stop)
        for idx, p in enumerate(run):
            pays[p] = _payoffs(model, reward, cfg, out_tau[idx], out_wx[idx],
                               out_ws[idx], out_stop[idx])
            stops[p] = out_stop[idx]
    for p in range(k):
        if immediate[p]:
            pays[p] = h(x0, s0)
            stops[p] = True

    estimates = tuple(_estimate(pays[p], stops[p], cfg) for p in range(k))
    diff_means, diff_stderrs, z_scores = [], [], []
    for p in range(1, k):
        d = pays[0] - pays[p]
        dm = float(np.mean(d))
        dv = float(np.var(d, ddof=1)) if n > 1 else 0.0
        ds = math.sqrt(dv / n)
        diff_means.append(dm)
        diff_stderrs.append(ds)
        z_scores.append(dm / ds if ds > 0.0 else 0.0)
    ranking = tuple(sorted(range(k), key=lambda p: -estimates[p].mean))
    inconclusive = any(abs(z) < 3.0 and s > 0.0
                       for z, s in zip(z_scores, diff_stderrs))
    return DominanceReport(estimates=estimates, diff_means=tuple(diff_means),
                           diff_stderrs=tuple(diff_stderrs),
                           z_scores=tuple(z_scores), ranking=ranking,
                           inconclusive=inconclusive)
