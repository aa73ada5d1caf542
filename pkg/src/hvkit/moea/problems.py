"""DTLZ test problems (minimization), with the usual reference points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROBLEMS = ("DTLZ1", "DTLZ2", "ConvexDTLZ2", "DTLZ5", "DTLZ7")

#: Per-objective reference value for hypervolume accounting (minimization).
REFERENCE_VALUES = {"DTLZ1": 400.0, "DTLZ2": 1.0, "ConvexDTLZ2": 1.0, "DTLZ5": 1.0, "DTLZ7": 15.0}


def _sphere(theta: np.ndarray, g: np.ndarray, m_dim: int) -> np.ndarray:
    """Spherical coordinates scaled by ``1 + g``; ``theta`` holds angles in [0, 1]."""
    n = theta.shape[0]
    F = np.empty((n, m_dim))
    cos = np.cos(theta * np.pi / 2)
    sin = np.sin(theta * np.pi / 2)
    for i in range(m_dim):
        k = m_dim - 1 - i
        f = (1.0 + g) * np.prod(cos[:, :k], axis=1)
        if i > 0:
            f = f * sin[:, k]
        F[:, i] = f
    return F


def _dtlz1(X, m_dim):
    Xm = X[:, m_dim - 1 :]
    k = Xm.shape[1]
    g = 100.0 * (k + np.sum((Xm - 0.5) ** 2 - np.cos(20.0 * np.pi * (Xm - 0.5)), axis=1))
    F = np.empty((X.shape[0], m_dim))
    for i in range(m_dim):
        j = m_dim - 1 - i
        f = 0.5 * (1.0 + g) * np.prod(X[:, :j], axis=1)
        if i > 0:
            f = f * (1.0 - X[:, j])
        F[:, i] = f
    return F


def _dtlz2(X, m_dim):
    g = np.sum((X[:, m_dim - 1 :] - 0.5) ** 2, axis=1)
    return _sphere(X[:, : m_dim - 1], g, m_dim)


def _convex_dtlz2(X, m_dim):
    F = _dtlz2(X, m_dim)
    F[:, :-1] = F[:, :-1] ** 4
    F[:, -1] = F[:, -1] ** 2
    return F


def _dtlz5(X, m_dim):
    g = np.sum((X[:, m_dim - 1 :] - 0.5) ** 2, axis=1)
    theta = (1.0 + 2.0 * g[:, None] * X[:, : m_dim - 1]) / (2.0 * (1.0 + g[:, None]))
    theta[:, 0] = X[:, 0]
    return _sphere(theta, g, m_dim)


def _dtlz7(X, m_dim):
    F = np.empty((X.shape[0], m_dim))
    F[:, :-1] = X[:, : m_dim - 1]
    Xm = X[:, m_dim - 1 :]
    g = 1.0 + 9.0 / Xm.shape[1] * np.sum(Xm, axis=1)
    f = F[:, :-1]
    h = m_dim - np.sum(f / (1.0 + g[:, None]) * (1.0 + np.sin(3.0 * np.pi * f)), axis=1)
    F[:, -1] = (1.0 + g) * h
    return F


_FUNCS = {"DTLZ1": _dtlz1, "DTLZ2": _dtlz2, "ConvexDTLZ2": _convex_dtlz2, "DTLZ5": _dtlz5, "DTLZ7": _dtlz7}


@dataclass(frozen=True)
class Problem:
    """A DTLZ instance on ``[0, 1]^d``; ``d`` defaults to ``2M``."""

    name: str
    m_dim: int
    d: int = 0
    reference_point: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.name not in _FUNCS:
            raise ValueError(f"unknown problem {self.name!r}; choose from {', '.join(PROBLEMS)}")
        if self.m_dim < 2:
            raise ValueError("DTLZ problems need M >= 2")
        d = self.d or 2 * self.m_dim
        if d < self.m_dim:
            raise ValueError(f"decision dimension {d} must be >= M={self.m_dim}")
        object.__setattr__(self, "d", d)
        if self.reference_point is None:
            ref = np.full(self.m_dim, REFERENCE_VALUES[self.name])
        else:
            ref = np.asarray(self.reference_point, dtype=np.float64)
        object.__setattr__(self, "reference_point", ref)

    def evaluate(self, X) -> np.ndarray:
        """Objective values (minimization) for one vector or a ``(n, d)`` batch."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.d:
            raise ValueError(f"{self.name} expects d={self.d} variables, got {X.shape[1]}")
        if np.any(X < 0.0) or np.any(X > 1.0) or not np.all(np.isfinite(X)):
            raise ValueError("decision variables must lie in [0, 1]")
        F = _FUNCS[self.name](X, self.m_dim)
        return F[0] if single else F

    def max_reference(self) -> np.ndarray:
        """Reference point after negation into the maximization convention."""
        return -self.reference_point


def dtlz_eval(problem: Problem, x) -> np.ndarray:
    return problem.evaluate(x)
