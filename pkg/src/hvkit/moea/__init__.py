"""DTLZ problems and hypervolume-driven evolutionary algorithms."""

from hvkit.moea.algorithms import (
    ALGORITHMS,
    EaHistory,
    Population,
    crowding_distance,
    nsga2_step,
    nsga2_survival,
    population_hv,
    run_ea,
    sms_emoa_step,
    sms_emoa_survival,
    truncate_by_contribution,
)
from hvkit.moea.backends import HvBackend
from hvkit.moea.operators import binary_tournament, polynomial_mutation, sbx
from hvkit.moea.problems import PROBLEMS, Problem, dtlz_eval

__all__ = [
    "ALGORITHMS",
    "EaHistory",
    "HvBackend",
    "PROBLEMS",
    "Population",
    "Problem",
    "binary_tournament",
    "crowding_distance",
    "dtlz_eval",
    "nsga2_step",
    "nsga2_survival",
    "polynomial_mutation",
    "population_hv",
    "run_ea",
    "sbx",
    "sms_emoa_step",
    "sms_emoa_survival",
    "truncate_by_contribution",
]
