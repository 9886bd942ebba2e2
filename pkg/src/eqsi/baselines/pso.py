"""Global-best particle swarm over the unit box with constriction-style
coefficients. Velocities start at zero; positions are clipped back into
the box after every move."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ObjectiveError, ParameterError


@dataclass
class SwarmConfig:
    size: int = 30
    inertia: float = 0.729
    cognitive: float = 1.494
    social: float = 1.494
    iterations: int = 100

    def __post_init__(self):
        if self.size < 1 or self.iterations < 0:
            raise ParameterError("swarm size and iteration count must be positive")


@dataclass
class PSOResult:
    best: np.ndarray
    best_score: float
    trace: list = field(default_factory=list)
    evaluations: int = 0


def _evaluate(objective, candidate: np.ndarray) -> float:
    value = float(objective(candidate))
    if not np.isfinite(value):
        raise ObjectiveError(f"objective returned non-finite value {value}")
    return value


def run_pso(objective, d: int, cfg: SwarmConfig | None = None, seed: int = 0) -> PSOResult:
    """Maximize objective over [0,1]^d."""
    cfg = cfg or SwarmConfig()
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(cfg.size, d))
    v = np.zeros_like(x)
    scores = np.array([_evaluate(objective, p) for p in x])
    pbest, pbest_s = x.copy(), scores.copy()
    g = int(np.argmax(scores))
    gbest, gbest_s = x[g].copy(), float(scores[g])

    result = PSOResult(best=gbest.copy(), best_score=gbest_s, evaluations=cfg.size)
    result.trace.append(gbest_s)
    for _ in range(cfg.iterations):
        r1 = rng.uniform(size=(cfg.size, d))
        r2 = rng.uniform(size=(cfg.size, d))
        v = cfg.inertia * v + cfg.cognitive * r1 * (pbest - x) + cfg.social * r2 * (gbest - x)
        x = np.clip(x + v, 0.0, 1.0)
        scores = np.array([_evaluate(objective, p) for p in x])
        result.evaluations += cfg.size
        improved = scores > pbest_s
        pbest[improved] = x[improved]
        pbest_s[improved] = scores[improved]
        g = int(np.argmax(pbest_s))
        if pbest_s[g] > gbest_s:
            gbest, gbest_s = pbest[g].copy(), float(pbest_s[g])
        result.trace.append(gbest_s)

    result.best, result.best_score = gbest, gbest_s
    return result
