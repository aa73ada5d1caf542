"""Pure NumPy versions of the compiled kernels.

Same signatures and semantics as :mod:`hvkit._kernels`: points are ``(N, M)``
rows in the maximization convention, reference point at the origin, entries
already clipped to be non-negative.
"""

from __future__ import annotations

import numpy as np


def _nondominated_rows(points: np.ndarray) -> np.ndarray:
    """Drop rows weakly dominated by another row (keeps one of each duplicate)."""
    keep: list[np.ndarray] = []
    for cand in points:
        if any(np.all(k >= cand) for k in keep):
            continue
        keep = [k for k in keep if not np.all(cand >= k)]
        keep.append(cand)
    if not keep:
        return points[:0]
    return np.asarray(keep)


def _hv(points: np.ndarray) -> float:
    n, d = points.shape
    if n == 0:
        return 0.0
    if d == 1:
        return float(points[:, 0].max())
    if n == 1:
        return float(np.prod(points[0]))
    if d == 2:
        pts = points[np.argsort(points[:, 0], kind="stable")[::-1]]
        vol = 0.0
        ymax = 0.0
        for x, y in pts:
            if y > ymax:
                vol += x * (y - ymax)
                ymax = y
        return vol
    pts = points[np.argsort(points[:, -1], kind="stable")]
    vol = 0.0
    for i in range(n):
        p = pts[i]
        if p[-1] <= 0.0:
            continue
        incl = float(np.prod(p[:-1]))
        if incl <= 0.0:
            continue
        limited = _nondominated_rows(np.minimum(pts[i + 1 :, :-1], p[:-1]))
        vol += p[-1] * (incl - _hv(limited))
    return vol


def hv_sweep(points: np.ndarray) -> float:
    """Exact hypervolume of ``points`` (N, M) w.r.t. the origin."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.size == 0:
        return 0.0
    return _hv(points)


def contributions(points: np.ndarray) -> np.ndarray:
    """Exclusive hypervolume of every row w.r.t. all other rows."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    out = np.zeros(n)
    for i in range(n):
        incl = float(np.prod(points[i]))
        if incl <= 0.0:
            continue
        others = np.delete(points, i, axis=0)
        limited = _nondominated_rows(np.minimum(others, points[i]))
        out[i] = max(incl - _hv(limited), 0.0)
    return out


def nd_ranks(points: np.ndarray) -> np.ndarray:
    """Front index of every row (0 = non-dominated), maximization."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    ranks = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return ranks
    a = points[:, None, :]
    b = points[None, :, :]
    # dom[i, j]: row i dominates row j
    dom = np.all(a >= b, axis=2) & np.any(a > b, axis=2)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    rank = 0
    while remaining.any():
        front = remaining & (count == 0)
        ranks[front] = rank
        remaining &= ~front
        count = count - dom[front].sum(axis=0)
        rank += 1
    return ranks


def mc_count(points: np.ndarray, samples: np.ndarray, chunk: int = 4096) -> int:
    """Number of sample rows weakly dominated by at least one point row."""
    points = np.asarray(points, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    if points.shape[0] == 0:
        return 0
    hits = 0
    for start in range(0, samples.shape[0], chunk):
        block = samples[start : start + chunk]
        inside = np.all(block[:, None, :] <= points[None, :, :], axis=2)
        hits += int(inside.any(axis=1).sum())
    return hits
