"""SMS-EMOA and NSGA-II with (mu + mu) survival, plus a seeded runner."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from hvkit.hypervolume import exact_hv, front_ranks, shift_and_clean
from hvkit.moea.backends import HvBackend
from hvkit.moea.operators import make_offspring
from hvkit.moea.problems import Problem

ALGORITHMS = ("sms-emoa", "nsga2")


@dataclass
class Population:
    """Decision vectors ``(mu, d)`` with cached minimization objectives ``(mu, M)``."""

    genomes: np.ndarray
    objectives: np.ndarray
    ranks: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.genomes.shape[0] != self.objectives.shape[0]:
            raise ValueError("genomes and objectives disagree on population size")
        self.ranks = front_ranks(-self.objectives.T) if len(self) else np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return self.genomes.shape[0]

    @classmethod
    def evaluate(cls, problem: Problem, genomes: np.ndarray) -> Population:
        return cls(genomes, problem.evaluate(genomes))

    @classmethod
    def random(cls, problem: Problem, size: int, rng: np.random.Generator) -> Population:
        return cls.evaluate(problem, rng.random((size, problem.d)))

    def take(self, idx) -> Population:
        idx = np.asarray(idx, dtype=np.intp)
        return Population(self.genomes[idx], self.objectives[idx])

    def max_values(self) -> np.ndarray:
        """Objectives as a maximization ``(M, mu)`` solution set."""
        return -self.objectives.T


def merge(a: Population, b: Population) -> Population:
    return Population(np.vstack([a.genomes, b.genomes]), np.vstack([a.objectives, b.objectives]))


def crowding_distance(F: np.ndarray) -> np.ndarray:
    """Per-objective neighbor-gap sum for rows of ``F``; boundary rows get inf."""
    n, m_dim = F.shape
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for m in range(m_dim):
        order = np.argsort(F[:, m], kind="stable")
        col = F[order, m]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def truncate_by_contribution(values: np.ndarray, keep: int, r, backend: HvBackend) -> list[int]:
    """Greedily drop the least-contributing column until ``keep`` remain.

    Contributions are recomputed after every removal.  Ties go to the lowest
    column index.  Returns the surviving column indices in original order.
    """
    alive = list(range(values.shape[1]))
    while len(alive) > keep:
        contrib = backend.contributions(values[:, alive], r)
        alive.pop(int(np.argmin(contrib)))
    return alive


def _fill_by_fronts(ranks: np.ndarray, mu: int) -> tuple[list[int], list[int]]:
    """Indices of whole fronts that fit, and the front that overflows (if any)."""
    chosen: list[int] = []
    for k in range(int(ranks.max()) + 1):
        front = np.flatnonzero(ranks == k).tolist()
        if len(chosen) + len(front) <= mu:
            chosen.extend(front)
            if len(chosen) == mu:
                return chosen, []
        else:
            return chosen, front
    return chosen, []


def sms_emoa_survival(union: Population, mu: int, r, backend: HvBackend) -> Population:
    chosen, overflow = _fill_by_fronts(union.ranks, mu)
    if overflow:
        vals = union.max_values()[:, overflow]
        kept = truncate_by_contribution(vals, mu - len(chosen), r, backend)
        chosen.extend(overflow[i] for i in kept)
    return union.take(sorted(chosen))


def nsga2_survival(union: Population, mu: int) -> Population:
    chosen, overflow = _fill_by_fronts(union.ranks, mu)
    if overflow:
        cd = crowding_distance(union.objectives[overflow])
        order = np.lexsort((np.arange(len(overflow)), -cd))
        chosen.extend(overflow[i] for i in order[: mu - len(chosen)])
    return union.take(sorted(chosen))


def _front_crowding(pop: Population) -> np.ndarray:
    cd = np.empty(len(pop))
    for k in np.unique(pop.ranks):
        idx = np.flatnonzero(pop.ranks == k)
        cd[idx] = crowding_distance(pop.objectives[idx])
    return cd


def sms_emoa_step(pop: Population, problem: Problem, backend: HvBackend,
                  rng: np.random.Generator) -> Population:
    """One (mu + mu) generation steered by hypervolume contributions."""
    mu = len(pop)
    kids = Population.evaluate(problem, make_offspring(pop.genomes, pop.ranks, rng, mu))
    return sms_emoa_survival(merge(pop, kids), mu, problem.max_reference(), backend)


def nsga2_step(pop: Population, problem: Problem, rng: np.random.Generator) -> Population:
    """One (mu + mu) generation with rank and crowding-distance survival."""
    mu = len(pop)
    genomes = make_offspring(pop.genomes, pop.ranks, rng, mu, score=_front_crowding(pop))
    kids = Population.evaluate(problem, genomes)
    return nsga2_survival(merge(pop, kids), mu)


def population_hv(pop: Population, problem: Problem) -> float:
    """Exact hypervolume of the population in the maximization frame."""
    D = shift_and_clean(pop.max_values(), problem.max_reference())
    return exact_hv(D, method="sweep")


@dataclass
class EaHistory:
    algorithm: str
    backend: str
    problem: str
    m_dim: int
    seed: int
    exact_hv: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)
    wall_seconds: list[float] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [
            {"algorithm": self.algorithm, "backend": self.backend, "problem": self.problem,
             "M": self.m_dim, "seed": self.seed, "generation": g, "evaluations": e,
             "exact_hv": hv, "wall_seconds": w}
            for g, (hv, e, w) in enumerate(zip(self.exact_hv, self.evaluations, self.wall_seconds))
        ]


def run_ea(algorithm: str, problem: Problem, generations: int = 10, pop_size: int = 100,
           seed: int = 0, backend: HvBackend | None = None) -> EaHistory:
    """Seeded run recording the exact hypervolume of every generation.

    Entry 0 is the initial population, so the history has ``generations + 1``
    entries whatever backend steers the search.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    if generations < 0 or pop_size < 2:
        raise ValueError("need generations >= 0 and pop_size >= 2")
    backend = backend or HvBackend("exact")
    name = backend.kind if algorithm == "sms-emoa" else "none"
    hist = EaHistory(algorithm, name, problem.name, problem.m_dim, seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    pop = Population.random(problem, pop_size, rng)
    evals = pop_size

    def record():
        hist.exact_hv.append(population_hv(pop, problem))
        hist.evaluations.append(evals)
        hist.wall_seconds.append(time.perf_counter() - t0)

    record()
    for gen in range(1, generations + 1):
        try:
            if algorithm == "sms-emoa":
                pop = sms_emoa_step(pop, problem, backend, rng)
            else:
                pop = nsga2_step(pop, problem, rng)
        except Exception as exc:
            raise RuntimeError(f"{algorithm} failed in generation {gen}: {exc}") from exc
        evals += pop_size
        record()
    return hist
