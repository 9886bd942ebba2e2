"""Genetic algorithm over the unit box with roulette-wheel selection.

Fixed crossover cut points per action layout: a single cut after gene 2
for 4-gene chromosomes, cuts after genes 3 and 6 for 8-gene ones. Every
child gene is jittered uniformly within the mutation range and clipped
back into [0, 1]. The best chromosome survives each generation
unchanged, so the best-fitness trace never regresses and the patience
rule measures genuine stagnation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ObjectiveError, ParameterError

ROULETTE_SHIFT = 1e-9


@dataclass
class GAConfig:
    population: int = 25
    mutation_range: float = 0.1
    term_eps: float = 0.0025
    patience: int = 10
    max_generations: int = 200

    def __post_init__(self):
        if self.population < 2:
            raise ParameterError("population must be >= 2")
        if self.term_eps <= 0:
            raise ParameterError("termination epsilon must be positive")


@dataclass
class GAResult:
    best: np.ndarray
    best_fitness: float
    trace: list = field(default_factory=list)
    evaluations: int = 0
    generations: int = 0
    terminated_early: bool = False


def roulette_pick(fitness: np.ndarray, rng: np.random.Generator) -> int:
    """Fitness-proportional draw; fitness is shifted to positive weights
    only when the minimum is nonpositive."""
    f = np.asarray(fitness, dtype=np.float64)
    if f.min() <= 0.0:
        w = f - f.min() + ROULETTE_SHIFT
    else:
        w = f
    return int(rng.choice(f.size, p=w / w.sum()))


def _crossover(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    d = p1.size
    if d == 4:
        return np.concatenate([p1[:2], p2[2:]])
    if d == 8:
        return np.concatenate([p1[:3], p2[3:6], p1[6:]])
    cut = d // 2
    return np.concatenate([p1[:cut], p2[cut:]])


def _evaluate(objective, candidate: np.ndarray) -> float:
    value = float(objective(candidate))
    if not np.isfinite(value):
        raise ObjectiveError(f"objective returned non-finite value {value}")
    return value


def run_ga(objective, d: int, cfg: GAConfig | None = None, seed: int = 0) -> GAResult:
    """Maximize objective over [0,1]^d; stops once the best fitness has
    moved by at most term_eps for patience consecutive generations, or at
    the generation cap."""
    cfg = cfg or GAConfig()
    rng = np.random.default_rng(seed)
    pop = rng.uniform(0.0, 1.0, size=(cfg.population, d))
    fitness = np.array([_evaluate(objective, c) for c in pop])
    result = GAResult(best=pop[0].copy(), best_fitness=float(fitness[0]))
    result.evaluations = cfg.population
    result.trace.append(float(fitness.max()))

    streak = 0
    for gen in range(1, cfg.max_generations + 1):
        elite = int(np.argmax(fitness))
        children = np.empty_like(pop)
        children[0] = pop[elite]
        child_fitness = np.empty(cfg.population)
        child_fitness[0] = fitness[elite]
        for i in range(1, cfg.population):
            pa = pop[roulette_pick(fitness, rng)]
            pb = pop[roulette_pick(fitness, rng)]
            child = _crossover(pa, pb)
            child = np.clip(child + rng.uniform(-cfg.mutation_range, cfg.mutation_range, size=d), 0.0, 1.0)
            children[i] = child
            child_fitness[i] = _evaluate(objective, child)
            result.evaluations += 1
        pop, fitness = children, child_fitness
        result.generations = gen
        zeta = float(fitness.max())
        if abs(zeta - result.trace[-1]) <= cfg.term_eps:
            streak += 1
        else:
            streak = 0
        result.trace.append(zeta)
        if streak >= cfg.patience:
            result.terminated_early = True
            break

    best = int(np.argmax(fitness))
    result.best = pop[best].copy()
    result.best_fitness = float(fitness[best])
    return result
