"""Curve helpers: log-log slopes and crossings of two sampled curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float


def fit_slope(x, y, log: bool = True) -> SlopeFit:
    """Least-squares slope of ``log y`` against ``log x`` (or of ``y`` against ``x``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need at least 3 (x, y) points of equal length")
    if log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive data")
        x, y = np.log(x), np.log(y)
    res = scipy.stats.linregress(x, y)
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept))


def find_crossing(xa, ya, xb, yb) -> float | None:
    """First sweep value where curve a minus curve b changes sign.

    Both curves are linearly interpolated onto the union of their sample
    points inside the overlapping domain.  Returns ``None`` when there is no
    sign change (touching at a single sample counts as a crossing).
    """
    xa, ya = np.asarray(xa, float), np.asarray(ya, float)
    xb, yb = np.asarray(xb, float), np.asarray(yb, float)
    ia, ib = np.argsort(xa), np.argsort(xb)
    xa, ya, xb, yb = xa[ia], ya[ia], xb[ib], yb[ib]
    keep_a, keep_b = np.isfinite(xa) & np.isfinite(ya), np.isfinite(xb) & np.isfinite(yb)
    xa, ya, xb, yb = xa[keep_a], ya[keep_a], xb[keep_b], yb[keep_b]
    if xa.size < 2 or xb.size < 2:
        return None
    lo, hi = max(xa[0], xb[0]), min(xa[-1], xb[-1])
    if lo >= hi:
        return None
    grid = np.union1d(xa, xb)
    grid = grid[(grid >= lo) & (grid <= hi)]
    d = np.interp(grid, xa, ya) - np.interp(grid, xb, yb)
    for k in range(grid.size):
        if d[k] == 0.0:
            return float(grid[k])
        if k and d[k - 1] * d[k] < 0:
            x0, x1 = grid[k - 1], grid[k]
            return float(x0 + (x1 - x0) * d[k - 1] / (d[k - 1] - d[k]))
    return None


def closest_approach(xa, ya, xb, yb) -> tuple[float, float]:
    """Sweep value and signed gap ``a - b`` where the curves come nearest (shared grid)."""
    xa, ya, xb, yb = (np.asarray(v, float) for v in (xa, ya, xb, yb))
    common, ia, ib = np.intersect1d(xa, xb, return_indices=True)
    ok = np.isfinite(common) & np.isfinite(ya[ia]) & np.isfinite(yb[ib])
    if not ok.any():
        raise ValueError("curves share no finite sample points")
    gap = (ya[ia] - yb[ib])[ok]
    k = int(np.argmin(np.abs(gap)))
    return float(common[ok][k]), float(gap[k])
