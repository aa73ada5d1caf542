"""Variation operators for real-coded genomes on a box."""

from __future__ import annotations

import numpy as np

SBX_ETA = 15.0
SBX_PROB = 0.9
SBX_VAR_PROB = 0.5
PM_ETA = 20.0


def sbx(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator, eta: float = SBX_ETA,
        prob: float = SBX_PROB, var_prob: float = SBX_VAR_PROB,
        lower: float | np.ndarray = 0.0, upper: float | np.ndarray = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Bounded simulated binary crossover on ``(n, d)`` parent pairs.

    Each pair crosses with probability ``prob``; within a crossing pair each
    variable is recombined with probability ``var_prob`` and the two children
    swap that variable with probability 1/2.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    n, d = p1.shape
    lower = np.broadcast_to(lower, (d,))
    upper = np.broadcast_to(upper, (d,))
    c1, c2 = p1.copy(), p2.copy()
    u = rng.random((n, d))
    active = (rng.random((n, 1)) < prob) & (rng.random((n, d)) < var_prob)
    active &= np.abs(p1 - p2) > 1e-14
    swap = rng.random((n, d)) < 0.5
    if not active.any():
        return c1, c2
    y1 = np.minimum(p1, p2)
    y2 = np.maximum(p1, p2)
    span = np.where(active, y2 - y1, 1.0)
    exp = 1.0 / (eta + 1.0)

    def spread(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        low = u <= 1.0 / alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(low, (u * alpha) ** exp, (1.0 / (2.0 - u * alpha)) ** exp)

    bq1 = spread(1.0 + 2.0 * (y1 - lower) / span)
    bq2 = spread(1.0 + 2.0 * (upper - y2) / span)
    k1 = np.clip(0.5 * (y1 + y2 - bq1 * (y2 - y1)), lower, upper)
    k2 = np.clip(0.5 * (y1 + y2 + bq2 * (y2 - y1)), lower, upper)
    k1, k2 = np.where(swap, k2, k1), np.where(swap, k1, k2)
    c1[active] = k1[active]
    c2[active] = k2[active]
    return c1, c2


def polynomial_mutation(X: np.ndarray, rng: np.random.Generator, eta: float = PM_ETA,
                        var_prob: float | None = None, lower: float | np.ndarray = 0.0,
                        upper: float | np.ndarray = 1.0) -> np.ndarray:
    """Bounded polynomial mutation; each variable mutates with ``var_prob`` (default 1/d)."""
    X = np.asarray(X, dtype=np.float64).copy()
    n, d = X.shape
    var_prob = 1.0 / d if var_prob is None else var_prob
    lower = np.broadcast_to(lower, (d,))
    upper = np.broadcast_to(upper, (d,))
    mask = rng.random((n, d)) < var_prob
    u = rng.random((n, d))
    if not mask.any():
        return X
    width = upper - lower
    d1 = (X - lower) / width
    d2 = (upper - X) / width
    exp = 1.0 / (eta + 1.0)
    low = u <= 0.5
    v_low = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
    v_high = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
    dq = np.where(low, v_low ** exp - 1.0, 1.0 - v_high ** exp)
    X[mask] = np.clip(X + dq * width, lower, upper)[mask]
    return X


def binary_tournament(rank: np.ndarray, rng: np.random.Generator, count: int,
                      score: np.ndarray | None = None) -> np.ndarray:
    """Pick ``count`` parents; lower rank wins, then higher ``score``, then the first draw."""
    n = rank.size
    a = rng.integers(0, n, count)
    b = rng.integers(0, n, count)
    a_wins = rank[a] < rank[b]
    if score is not None:
        a_wins |= (rank[a] == rank[b]) & (score[a] > score[b])
    tie = rank[a] == rank[b]
    if score is not None:
        tie &= score[a] == score[b]
    a_wins |= tie
    return np.where(a_wins, a, b)


def make_offspring(genomes: np.ndarray, rank: np.ndarray, rng: np.random.Generator,
                   count: int, score: np.ndarray | None = None) -> np.ndarray:
    """Tournament selection, SBX and polynomial mutation; returns ``(count, d)``."""
    pairs = (count + 1) // 2
    parents = binary_tournament(rank, rng, 2 * pairs, score)
    c1, c2 = sbx(genomes[parents[:pairs]], genomes[parents[pairs:]], rng)
    children = np.vstack([c1, c2])[:count]
    return polynomial_mutation(children, rng)
