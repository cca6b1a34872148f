"""Evolutionary search over the two decisive scalar hyperparameters.

A seeded (mu+lambda)-style evolution strategy: keep the best candidates as
elites, refill the population with Gaussian mutations of them, clip to box
bounds, repeat. Elites are re-evaluated each generation (objectives are
required to be deterministic), which keeps the evaluation budget exactly
population * generations plus the initial population.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

from . import rng
from .errors import StructuralError

Objective = Callable[[float, float], float]


@dataclass(frozen=True)
class EvoConfig:
    """Search-space bounds and strategy knobs for the (steepness, delta) pair."""

    bounds: tuple[tuple[float, float], tuple[float, float]]
    population: int = 8
    generations: int = 50
    mutation_sigma: tuple[float, float] | None = None  # default: 0.2 * range per parameter
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise StructuralError("population must be at least 2")
        if self.generations < 1:
            raise StructuralError("generations must be at least 1")
        if not 1 <= self.elitism < self.population:
            raise StructuralError("elitism must lie in [1, population)")
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise StructuralError(f"bounds must be finite with lower < upper, got ({lo}, {hi})")

    def sigmas(self) -> tuple[float, float]:
        if self.mutation_sigma is not None:
            return self.mutation_sigma
        return tuple(0.2 * (hi - lo) for lo, hi in self.bounds)


@dataclass(frozen=True)
class EvoResult:
    best_params: tuple[float, float]
    best_fitness: float
    history: tuple[float, ...]  # per-generation best, non-decreasing under elitism
    evaluations: int


def _evaluate(objective: Objective, candidates, counter: list[int]) -> list[float]:
    out = []
    for s, d in candidates:
        counter[0] += 1
        fitness = float(objective(float(s), float(d)))
        if not math.isfinite(fitness):
            warnings.warn(
                f"objective returned non-finite fitness at (s={s:.6g}, delta={d:.6g}); "
                "candidate discarded",
                RuntimeWarning,
                stacklevel=3,
            )
            fitness = -math.inf
        out.append(fitness)
    return out


def evolve(objective: Objective, config: EvoConfig, *, log_path: str | None = None) -> EvoResult:
    """Maximise `objective(s, delta)` inside the configured box.

    Deterministic given config.seed. Candidates with non-finite fitness are
    discarded (with a warning) rather than crashing the loop.
    """
    gen = rng.substream(config.seed, rng.SUB_EVOLVE)
    (s_lo, s_hi), (d_lo, d_hi) = config.bounds
    sig_s, sig_d = config.sigmas()

    population = [
        (gen.uniform(s_lo, s_hi), gen.uniform(d_lo, d_hi)) for _ in range(config.population)
    ]
    counter = [0]
    fitness = _evaluate(objective, population, counter)

    history: list[float] = []
    log_lines: list[str] = []
    for generation in range(config.generations):
        order = sorted(range(len(population)), key=lambda i: fitness[i], reverse=True)
        elites = [population[i] for i in order[: config.elitism]]
        offspring = []
        for i in range(config.population - config.elitism):
            parent = elites[i % len(elites)]
            child = (
                min(max(parent[0] + gen.normal(0.0, sig_s), s_lo), s_hi),
                min(max(parent[1] + gen.normal(0.0, sig_d), d_lo), d_hi),
            )
            offspring.append(child)
        population = elites + offspring
        fitness = _evaluate(objective, population, counter)
        best_i = max(range(len(population)), key=lambda i: fitness[i])
        history.append(fitness[best_i])
        finite = [f for f in fitness if math.isfinite(f)]
        mean = sum(finite) / len(finite) if finite else -math.inf
        log_lines.append(
            f"{generation},{fitness[best_i]:.10g},{mean:.10g},"
            f"{population[best_i][0]:.10g},{population[best_i][1]:.10g}"
        )

    if log_path is not None:
        with open(log_path, "a") as fh:
            fh.write("\n".join(log_lines) + "\n")

    best_i = max(range(len(population)), key=lambda i: fitness[i])
    return EvoResult(
        best_params=(float(population[best_i][0]), float(population[best_i][1])),
        best_fitness=fitness[best_i],
        history=tuple(history),
        evaluations=counter[0],
    )
