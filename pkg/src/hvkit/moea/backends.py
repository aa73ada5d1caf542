"""Hypervolume scorers used to rank front members for truncation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from hvkit import deephv
from hvkit.hypervolume import exact_hv, hv_contributions, shift_and_clean
from hvkit.montecarlo import McConfig, estimate_hv

log = logging.getLogger(__name__)

KINDS = ("exact", "mc", "deep")


@dataclass
class HvBackend:
    """Scores maximization sets ``(M, N)`` against a reference point.

    ``kind`` is ``"exact"``, ``"mc"`` (with ``mc``) or ``"deep"`` (with
    ``weights``).
    """

    kind: str = "exact"
    mc: McConfig | None = None
    weights: deephv.NetworkWeights | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.kind == "mc" and self.mc is None:
            self.mc = McConfig()
        if self.kind == "deep" and self.weights is None:
            raise ValueError("the deep backend needs network weights")

    def score(self, values, r) -> float:
        if self.kind == "exact":
            return exact_hv(shift_and_clean(values, r), method="sweep")
        if self.kind == "mc":
            return estimate_hv(values, r, self.mc)
        D = shift_and_clean(values, r)
        if D.shape[1] == 0:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", deephv.CapacityWarning)
            return deephv.forward(D, self.weights)

    def contributions(self, values, r) -> np.ndarray:
        """Leave-one-out hypervolume loss of every column."""
        Y = np.asarray(values, dtype=np.float64)
        n = Y.shape[1]
        if self.kind == "exact":
            return hv_contributions(Y, r)
        if self.kind == "deep":
            return self._deep_contributions(Y, r)
        full = self.score(Y, r)
        # every estimate reuses the same sample stream, so the differences
        # carry less noise than independent draws would
        out = np.empty(n)
        for j in range(n):
            out[j] = full - self.score(np.delete(Y, j, axis=1), r)
        return out

    def _deep_contributions(self, Y: np.ndarray, r) -> np.ndarray:
        n = Y.shape[1]
        sets = [shift_and_clean(Y, r)] + [shift_and_clean(np.delete(Y, j, axis=1), r) for j in range(n)]
        if sets[0].shape[1] > deephv.TRAINED_MAX_POINTS:
            log.warning("scoring a front of %d points, beyond the trained cap of %d",
                        sets[0].shape[1], deephv.TRAINED_MAX_POINTS)
        scores = np.zeros(len(sets))
        live = [i for i, D in enumerate(sets) if D.shape[1] > 0]
        if live:
            batch = deephv.PackedBatch.from_sets([sets[i] for i in live])
            scores[live] = deephv.predict_packed(batch, self.weights)
        return scores[0] - scores[1:]
