"""Exact hypervolume, dominance, and the scaling/permutation group action.

Solution sets are ``(M, N)`` arrays: one row per objective, one column per
solution.  Everything here uses the maximization convention, so a point
contributes volume when it lies strictly above the reference point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hvkit._accel import kernels

#: Largest N for which ``exact_hv(method="auto")`` uses inclusion-exclusion.
IE_MAX_POINTS = 12


def as_solution_set(values, m_dim: int | None = None) -> np.ndarray:
    """Coerce ``values`` into a float64 ``(M, N)`` array.

    A 1-D input is read as a single solution.  ``m_dim`` is only needed to
    give an empty set its row count.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else np.zeros((m_dim or 0, 0))
    if arr.ndim != 2:
        raise ValueError(f"a solution set must be 2-D (M, N), got shape {arr.shape}")
    if arr.shape[1] == 0 and m_dim is not None and arr.shape[0] != m_dim:
        arr = np.zeros((m_dim, 0))
    return arr


def _ref(r, m_dim: int) -> np.ndarray:
    if r is None:
        return np.zeros(m_dim)
    ref = np.asarray(r, dtype=np.float64).reshape(-1)
    if ref.shape[0] != m_dim:
        raise ValueError(f"reference point has length {ref.shape[0]}, expected {m_dim}")
    if not np.all(np.isfinite(ref)):
        raise ValueError("reference point must be finite")
    return ref


def dominates(a, b) -> bool:
    """True if ``b`` dominates ``a``: ``a <= b`` everywhere and ``a != b``.

    >>> dominates([1, 2], [2, 2])
    True
    >>> dominates([1, 3], [3, 1])
    False
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def front_ranks(values) -> np.ndarray:
    """Front index (0-based) of every column of an ``(M, N)`` set."""
    Y = as_solution_set(values)
    return kernels.nd_ranks(np.ascontiguousarray(Y.T))


def non_dominated_sort(values) -> list[list[int]]:
    """Partition the columns into successive non-dominated fronts.

    Columns keep their original order inside each front.  Duplicate columns do
    not dominate each other and land in the same front.
    """
    ranks = front_ranks(values)
    if ranks.size == 0:
        return []
    return [np.flatnonzero(ranks == k).tolist() for k in range(int(ranks.max()) + 1)]


def _clipped(values, r) -> np.ndarray:
    Y = as_solution_set(values)
    if not np.all(np.isfinite(Y)):
        raise ValueError("solution set contains non-finite values")
    ref = _ref(r, Y.shape[0])
    return np.maximum(Y - ref[:, None], 0.0)


def hv_inclusion_exclusion(values, r=None) -> float:
    """Hypervolume by summing over every non-empty subset of columns.

    Cost is ``O(2^N M)``; meant for small sets and as an oracle.  Terms are
    formed with their per-subset minima sorted and accumulated with
    :func:`math.fsum`, so the result does not depend on row or column order.
    """
    D = _clipped(values, r)
    m_dim, n = D.shape
    if n == 0 or m_dim == 0:
        return 0.0
    if n > 24:
        raise ValueError(f"inclusion-exclusion over N={n} points is not tractable")
    mins = np.empty((1 << n, m_dim))
    sign = np.empty(1 << n)
    mins[0] = np.inf
    sign[0] = 0.0
    for j in range(n):
        lo, hi = 1 << j, 1 << (j + 1)
        mins[lo:hi] = np.minimum(mins[:lo], D[:, j])
        sign[lo:hi] = np.where(np.arange(lo) == 0, 1.0, -sign[:lo])
    terms = np.prod(np.sort(mins[1:], axis=1), axis=1) * sign[1:]
    return max(math.fsum(terms.tolist()), 0.0)


def hv_sweep(values, r=None) -> float:
    """Hypervolume by slicing along the last objective and recursing."""
    D = _clipped(values, r)
    if D.shape[1] == 0 or D.shape[0] == 0:
        return 0.0
    D = D[:, np.all(D > 0.0, axis=0)]
    if D.shape[1] == 0:
        return 0.0
    return float(kernels.hv_sweep(np.ascontiguousarray(D.T)))


def exact_hv(values, r=None, method: str = "auto") -> float:
    """Lebesgue measure of the union of boxes ``[r, y_j]``.

    Coordinates below the reference point are clipped to it, so a point that
    fails to dominate ``r`` adds nothing.  ``method`` is ``"ie"``
    (inclusion-exclusion), ``"sweep"``, or ``"auto"`` (inclusion-exclusion up
    to :data:`IE_MAX_POINTS` columns, sweep beyond).
    """
    if method == "ie":
        return hv_inclusion_exclusion(values, r)
    if method == "sweep":
        return hv_sweep(values, r)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    Y = as_solution_set(values)
    if Y.shape[1] <= IE_MAX_POINTS:
        return hv_inclusion_exclusion(Y, r)
    return hv_sweep(Y, r)


def hv_contributions(values, r=None) -> np.ndarray:
    """Hypervolume lost when each column is removed on its own."""
    D = _clipped(values, r)
    if D.shape[1] == 0:
        return np.zeros(0)
    return kernels.contributions(np.ascontiguousarray(D.T))


def hvi(y, values, r=None) -> float:
    """Hypervolume improvement of adding point ``y`` to ``values``."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    Y = as_solution_set(values, m_dim=y.shape[0])
    if Y.shape[0] != y.shape[0]:
        raise ValueError(f"point has length {y.shape[0]}, set has M={Y.shape[0]}")
    ref = _ref(r, y.shape[0])
    if not np.all(y > ref):
        return 0.0
    if any(np.all(y <= Y[:, j]) for j in range(Y.shape[1])):
        return 0.0
    # exclusive volume of y against the clipped set
    D = np.maximum(Y - ref[:, None], 0.0)
    p = y - ref
    limited = np.minimum(D, p[:, None])
    return max(float(np.prod(p)) - hv_sweep(limited), 0.0)


def pad_to_dim(values, target_m: int) -> np.ndarray:
    """Append rows of ones until the set has ``target_m`` objectives.

    Only valid at unit scale (values in ``[0, 1]``), where the extra unit-length
    axes leave the hypervolume w.r.t. the origin unchanged.
    """
    Y = as_solution_set(values)
    m_dim, n = Y.shape
    if target_m < m_dim:
        raise ValueError(f"cannot pad M={m_dim} down to {target_m}")
    if Y.size and (Y.min() < 0.0 or Y.max() > 1.0):
        raise ValueError("padding with ones needs values in [0, 1]")
    return np.vstack([Y, np.ones((target_m - m_dim, n))])


def shift_and_clean(values, r=None) -> np.ndarray:
    """Shift by ``r``, drop columns not strictly above it, keep front 1."""
    Y = as_solution_set(values)
    ref = _ref(r, Y.shape[0])
    D = Y - ref[:, None]
    D = D[:, np.all(D > 0.0, axis=0)]
    if D.shape[1] <= 1:
        return D
    return D[:, front_ranks(D) == 0]


@dataclass(frozen=True)
class GroupElement:
    """Element ``(c, tau, sigma)`` of positive scalings x objective perms x point perms.

    ``tau`` and ``sigma`` are index arrays: the acted matrix has entry
    ``c[m] * Y[tau[m], sigma[n]]`` at ``(m, n)``.
    """

    c: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        tau = np.asarray(self.tau, dtype=np.intp)
        sigma = np.asarray(self.sigma, dtype=np.intp)
        if not np.all(c > 0):
            raise ValueError("scalings must be strictly positive")
        if c.shape != tau.shape:
            raise ValueError("c and tau must both have length M")
        for name, perm in (("tau", tau), ("sigma", sigma)):
            if not np.array_equal(np.sort(perm), np.arange(perm.size)):
                raise ValueError(f"{name} is not a permutation")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def identity(cls, m_dim: int, n_count: int) -> GroupElement:
        return cls(np.ones(m_dim), np.arange(m_dim), np.arange(n_count))

    @classmethod
    def random(cls, m_dim: int, n_count: int, rng: np.random.Generator,
               log_scale: float = 1.0) -> GroupElement:
        return cls(
            np.exp(rng.uniform(-log_scale, log_scale, m_dim)),
            rng.permutation(m_dim),
            rng.permutation(n_count),
        )

    def __mul__(self, other: GroupElement) -> GroupElement:
        """Group product ``self * other`` (apply ``other`` first)."""
        # (c2, t2, s2) * (c1, t1, s1) = (c2 * c1[t2], t1[t2], s1[s2]) in
        # index-array form, matching act(g2, act(g1, Y)).
        return GroupElement(
            self.c * other.c[self.tau],
            other.tau[self.tau],
            other.sigma[self.sigma],
        )


def group_act(g: GroupElement, values) -> np.ndarray:
    """Apply ``g`` to an ``(M, N)`` matrix."""
    Y = as_solution_set(values)
    if Y.shape != (g.c.size, g.sigma.size):
        raise ValueError(f"group element is for shape {(g.c.size, g.sigma.size)}, got {Y.shape}")
    return g.c[:, None] * Y[np.ix_(g.tau, g.sigma)]
