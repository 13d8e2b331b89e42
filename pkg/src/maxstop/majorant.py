"""Concave-majorant geometry in transformed coordinates.

Smallest nonnegative concave majorants are built as upper convex hulls of
sampled points (monotone chain), optionally pinned at interval endpoints;
tangency points are then sharpened with a bracketing root finder.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NoTangencyError, RewardError
from .reward import TransformedReward, is_kink


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class PiecewiseMajorant:
    """Piecewise-linear concave majorant: knots (y_i, w_i) with contact flags."""

    knot_y: np.ndarray
    knot_w: np.ndarray
    contact: np.ndarray  # bool per knot: majorant touches the underlying function

    def __post_init__(self):
        if len(self.knot_y) < 2:
            raise ValueError("a majorant needs at least two knots")
        dy = np.diff(self.knot_y)
        if np.any(dy <= 0.0):
            raise ValueError("knots must be strictly ascending")

    def __call__(self, y):
        return np.interp(y, self.knot_y, self.knot_w)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.knot_w) / np.diff(self.knot_y)

    @property
    def contact_set(self) -> np.ndarray:
        return self.knot_y[self.contact]

    def slope_at(self, y: float) -> float:
        """Slope of the segment containing y (right segment at a knot)."""
        i = int(np.searchsorted(self.knot_y, y, side="right")) - 1
        i = min(max(i, 0), len(self.knot_y) - 2)
        return float(self.slopes[i])


def upper_concave_envelope(samples, pins=()) -> PiecewiseMajorant:
    """Upper convex hull of samples plus pinned points.

    Samples are (y, H(y)) pairs; pins are (y, w) points the majorant must
    pass through (they enter the hull like samples but are not part of the
    contact set unless they coincide with the function).  Raises if a pin
    lies strictly below the function value at the same abscissa.
    """
    sy = np.asarray([p[0] for p in samples], dtype=float)
    sw = np.asarray([p[1] for p in samples], dtype=float)
    if len(sy) == 0:
        raise ValueError("no samples")
    order = np.argsort(sy)
    sy, sw = sy[order], sw[order]
    if not np.all(np.isfinite(sy)) or not np.all(np.isfinite(sw)):
        raise ValueError("non-finite sample")

    py = np.asarray([p[0] for p in pins], dtype=float)
    pw = np.asarray([p[1] for p in pins], dtype=float)
    for y0, w0 in zip(py, pw):
        j = np.searchsorted(sy, y0)
        for jj in (j - 1, j):
            if 0 <= jj < len(sy) and abs(sy[jj] - y0) <= 1e-12 * (1.0 + abs(y0)):
                if w0 < sw[jj] - 1e-9 * (1.0 + abs(sw[jj])):
                    raise RewardError(
                        f"pin ({y0}, {w0}) lies below the function value {sw[jj]}")

    ally = np.concatenate([sy, py])
    allw = np.concatenate([sw, pw])
    ispin = np.concatenate([np.zeros(len(sy), bool), np.ones(len(py), bool)])
    order = np.argsort(ally, kind="stable")
    ally, allw, ispin = ally[order], allw[order], ispin[order]

    if len(py):
        lo, hi = float(np.min(py)), float(np.max(py))
        if hi > lo:
            keep = (ally >= lo - 1e-15) & (ally <= hi + 1e-15)
            ally, allw, ispin = ally[keep], allw[keep], ispin[keep]

    # drop duplicate abscissae, keeping the higher point (pin wins ties upward)
    uy, uw, upin = [], [], []
    for y, w, p in zip(ally, allw, ispin):
        if uy and abs(y - uy[-1]) <= 1e-15 * (1.0 + abs(y)):
            if w > uw[-1]:
                uw[-1], upin[-1] = w, p
        else:
            uy.append(y); uw.append(w); upin.append(p)
    ally = np.array(uy); allw = np.array(uw); ispin = np.array(upin)

    # monotone-chain upper hull
    hull: list[int] = []
    for i in range(len(ally)):
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            cross = ((allw[i2] - allw[i1]) * (ally[i] - ally[i2])
                     - (allw[i] - allw[i2]) * (ally[i2] - ally[i1]))
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)

    ky = ally[hull]
    kw = allw[hull]
    kpin = ispin[hull]

    # contact: hull knot equals the sampled function value there
    contact = np.zeros(len(ky), bool)
    for i, (y, w, p) in enumerate(zip(ky, kw, kpin)):
        j = np.searchsorted(sy, y)
        for jj in (j - 1, j):
            if 0 <= jj < len(sy) and abs(sy[jj] - y) <= 1e-12 * (1.0 + abs(y)):
                atol = 1e-9 * (1.0 + abs(w))
                if abs(sw[jj] - w) <= atol:
                    contact[i] = True
    return PiecewiseMajorant(knot_y=ky, knot_w=kw, contact=contact)


def tangent_from_point(tr: TransformedReward, p: tuple[float, float],
                       side: Side = Side.LEFT, bracket: tuple[float, float] = None,
                       n_scan: int = 512, xtol: float = 1e-10):
    """Tangency point of the line through p = (y0, w0) touching H.

    Solves H'(y)(y0 - y) = w0 - H(y) by scanning for a sign change of the
    residual, then bracketing to `xtol` relative abscissa tolerance.  Ties
    (several tangencies) resolve to the largest abscissa.  Returns
    (y_star, slope, degenerate_flag).
    """
    y0, w0 = p
    model = tr.model
    if bracket is None:
        l, r = model.spec.interval
        lo = model.F(l + 1e-8 * max(abs(tr.s), 1.0)) if math.isfinite(l) else None
        if lo is None:
            lo = model.F(tr.s) * 1e-12
        hi = model.F(min(4.0 * tr.s, r - 1e-12) if math.isfinite(r) else 4.0 * tr.s)
        bracket = (lo, hi)
    lo, hi = bracket
    if side is Side.LEFT:
        hi = min(hi, y0) if y0 > lo else hi
    else:
        lo = max(lo, y0) if y0 < hi else lo

    def resid(y):
        return tr.Hprime(y) * (y0 - y) - (w0 - tr.H(y))

    ys = np.geomspace(max(lo, 1e-300), hi, n_scan)
    rs = np.array([resid(y) for y in ys])

    scale = np.max(np.abs(rs)) if len(rs) else 0.0
    if scale == 0.0 or np.all(np.abs(rs) <= 1e-12 * (1.0 + abs(w0))):
        # H linear through p: every point is tangent
        mid = math.sqrt(lo * hi)
        return mid, tr.Hprime(mid), True

    # exact-zero residuals (flat stretches of H through p) carry no sign
    # information; skip over them when looking for a crossing
    sign = np.sign(rs)
    nz = np.nonzero(sign != 0.0)[0]
    change = [(nz[k], nz[k + 1]) for k in range(len(nz) - 1)
              if sign[nz[k]] * sign[nz[k + 1]] < 0.0]
    if not change:
        raise NoTangencyError(
            f"no tangency from ({y0}, {w0}) on [{lo:g}, {hi:g}]")
    i, j = change[-1]  # largest tangency abscissa
    y_star = brentq(resid, ys[i], ys[j], xtol=xtol * max(1.0, ys[j]))
    return y_star, tr.Hprime(y_star), False


def slope_at(tr: TransformedReward, x: float) -> tuple[float, bool]:
    """H-slope (h/phi)'(x)/F'(x) at state x; one-sided (from the right) at a kink."""
    kink = is_kink(tr.spec, x)
    if kink:
        x = x * (1.0 + 1e-12) + 1e-300
    return tr.slope_at_x(x), kink
