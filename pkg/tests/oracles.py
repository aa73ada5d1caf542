"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools

import numpy as np

from hvkit import deephv
from hvkit.deephv import LayerWeights, NetworkWeights, PackedBatch, loss_and_grad


def cell_hv(values, r=None) -> float:
    """Hypervolume by coordinate compression.

    Splits each axis at every distinct coordinate, then sums the volume of
    every grid cell whose upper corner is weakly dominated by some point.
    Exact for arbitrary reals; cost grows like ``N^M``.
    """
    Y = np.asarray(values, dtype=np.float64)
    m_dim, n = Y.shape
    r = np.zeros(m_dim) if r is None else np.asarray(r, dtype=np.float64)
    D = np.maximum(Y - r[:, None], 0.0)
    if n == 0:
        return 0.0
    axes = [np.unique(np.concatenate([[0.0], D[m]])) for m in range(m_dim)]
    total = 0.0
    for idx in itertools.product(*(range(1, len(a)) for a in axes)):
        upper = np.array([axes[m][i] for m, i in enumerate(idx)])
        if np.any(np.all(D >= upper[:, None], axis=0)):
            width = np.array([axes[m][i] - axes[m][i - 1] for m, i in enumerate(idx)])
            total += float(np.prod(width))
    return total


def mc_hv(values, samples: int, seed: int) -> float:
    """Plain-loop Monte-Carlo estimate in the box ``[0, max]`` (r = 0)."""
    Y = np.asarray(values, dtype=np.float64)
    upper = Y.max(axis=1)
    rng = np.random.default_rng(seed)
    pts = rng.random((samples, Y.shape[0])) * upper
    hits = sum(bool(np.any(np.all(p[:, None] <= Y, axis=0))) for p in pts)
    return hits / samples * float(np.prod(upper))


def naive_fronts(values) -> list[list[int]]:
    """Repeatedly peel off the columns that no remaining column dominates."""
    Y = np.asarray(values, dtype=np.float64)
    left = list(range(Y.shape[1]))
    fronts = []
    while left:
        front = [
            j for j in left
            if not any(np.all(Y[:, j] <= Y[:, k]) and np.any(Y[:, j] < Y[:, k]) for k in left)
        ]
        fronts.append(front)
        left = [j for j in left if j not in front]
    return fronts


def random_front(m_dim: int, n: int, rng) -> np.ndarray:
    """``n`` mutually non-dominated points in ``(0, 1]^M`` (on the positive sphere)."""
    pts = np.abs(rng.normal(size=(m_dim, n))) + 1e-3
    return pts / np.linalg.norm(pts, axis=0, keepdims=True)


# -- finite-difference oracle -------------------------------------------------


def as_longdouble(weights: NetworkWeights) -> NetworkWeights:
    ld = np.longdouble
    layers = [LayerWeights(lw.w.astype(ld), lw.bias.astype(ld)) for lw in weights.layers]
    return NetworkWeights(weights.channels, layers, weights.leak)


def longdouble_batch(sets) -> PackedBatch:
    batch = PackedBatch.from_sets(sets)
    batch.unit = batch.unit.astype(np.longdouble)
    batch.scale_prod = batch.scale_prod.astype(np.longdouble)
    return batch


def branch_pattern(batch: PackedBatch, weights: NetworkWeights) -> np.ndarray:
    """Which side of every non-smooth point the forward pass is on.

    Records the sign of each pre-activation and which entries attain each row
    scale.  Central differences are only an estimate of the derivative when
    this pattern is the same at both probe points.
    """
    parts = []
    for cache in deephv._run(batch, weights, keep=True)[2]:
        H, S, P = cache[0], cache[2], cache[-1]
        parts += [(P > 0).ravel(), (np.abs(H) == S).ravel()]
    return np.concatenate(parts)


def fd_check(sets, targets, weights, rng, per_array=12, eps=1e-4):
    """Compare analytic and central-difference partials on random coordinates.

    Up to ``per_array`` distinct coordinates are drawn from each array.
    Returns ``(rel_errors, skipped)``: coordinates whose probe window
    straddles a non-smooth point are replaced by another draw and counted in
    ``skipped``.
    """
    _, grads, _ = loss_and_grad(PackedBatch.from_sets(sets), targets, weights)
    W = as_longdouble(weights)
    batch = longdouble_batch(sets)
    t = np.asarray(targets, dtype=np.longdouble)

    def loss():
        pred = deephv.predict_packed(batch, W)
        return np.mean(np.abs(pred - t) / t)

    errors, skipped = [], 0
    for k, (lw, glw) in enumerate(zip(W.layers, grads.layers)):
        for arr, garr in ((lw.w, glw.w), (lw.bias, glw.bias)):
            done = 0
            for flat in rng.permutation(arr.size):
                if done == per_array:
                    break
                idx = np.unravel_index(flat, arr.shape)
                old = arr[idx]
                arr[idx] = old + eps
                up, pat_up = loss(), branch_pattern(batch, W)
                arr[idx] = old - eps
                down, pat_down = loss(), branch_pattern(batch, W)
                arr[idx] = old
                if not np.array_equal(pat_up, pat_down):
                    skipped += 1
                    continue
                fd = float((up - down) / (2 * eps))
                an = float(garr[idx])
                errors.append((k, abs(fd - an) / max(abs(fd), abs(an), 1e-12)))
                done += 1
    return errors, skipped
