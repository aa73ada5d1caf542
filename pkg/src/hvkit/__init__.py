"""Hypervolume toolkit: exact and Monte-Carlo hypervolume, the DeepHV
equivariant network, and hypervolume-driven evolutionary algorithms."""

from hvkit._accel import BACKEND_NAME, HAVE_EXTENSION
from hvkit.hypervolume import (
    GroupElement,
    dominates,
    exact_hv,
    group_act,
    hv_contributions,
    hvi,
    non_dominated_sort,
    pad_to_dim,
    shift_and_clean,
)
from hvkit.montecarlo import McConfig, estimate_hv

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "HAVE_EXTENSION",
    "GroupElement",
    "McConfig",
    "dominates",
    "estimate_hv",
    "exact_hv",
    "group_act",
    "hv_contributions",
    "hvi",
    "non_dominated_sort",
    "pad_to_dim",
    "shift_and_clean",
]
