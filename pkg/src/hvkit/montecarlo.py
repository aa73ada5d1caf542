"""Monte-Carlo hypervolume estimate over the bounding box of the set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hvkit._accel import kernels
from hvkit.hypervolume import shift_and_clean

#: Samples per estimate used in the timing and EA experiments.
DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class McConfig:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    batch: int = 65_536

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def estimate_hv(values, r=None, cfg: McConfig | None = None) -> float:
    """Estimate the hypervolume of ``values`` w.r.t. ``r``.

    Uniform samples are drawn in the box spanned by the reference point and
    the per-objective maxima of the (shifted, cleaned) set; the estimate is
    the fraction dominated by some column times the box volume.  Samples come
    from a PCG64 stream seeded by ``cfg.seed`` in fixed-size batches, so the
    result is reproducible and independent of how the hit test is run.
    """
    cfg = cfg or McConfig()
    D = shift_and_clean(values, r)
    if D.size == 0 or D.shape[1] == 0:
        return 0.0
    upper = D.max(axis=1)
    box = float(np.prod(upper))
    pts = np.ascontiguousarray(D.T)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    hits = 0
    remaining = cfg.samples
    while remaining:
        size = min(cfg.batch, remaining)
        samples = rng.random((size, D.shape[0])) * upper
        hits += int(kernels.mc_count(pts, np.ascontiguousarray(samples)))
        remaining -= size
    return hits / cfg.samples * box


def binomial_sigma(exact: float, box_volume: float, samples: int) -> float:
    """Standard deviation of the estimate when the true volume is ``exact``."""
    p = exact / box_volume
    return box_volume * float(np.sqrt(p * (1.0 - p) / samples))
