"""Exhaustive lattice search over the unit box."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import BudgetError, ObjectiveError, ParameterError

GRID_BUDGET = 10_000_000


@dataclass
class GridResult:
    best: np.ndarray
    best_score: float
    evaluations: int


def run_grid(objective, d: int, levels: int) -> GridResult:
    """Evaluate every point of the levels^d lattice over [0,1]^d and return
    the argmax; exact ties keep the earliest point in row-major order."""
    if levels < 2:
        raise ParameterError(f"need at least 2 levels per dimension, got {levels}")
    total = levels**d
    if total > GRID_BUDGET:
        raise BudgetError(f"{levels}^{d} = {total} evaluations exceeds the {GRID_BUDGET} budget")
    axis = np.linspace(0.0, 1.0, levels)
    best, best_score = None, None
    for combo in itertools.product(range(levels), repeat=d):
        candidate = axis[list(combo)]
        value = float(objective(candidate))
        if not np.isfinite(value):
            raise ObjectiveError(f"objective returned non-finite value {value}")
        if best_score is None or value > best_score:
            best, best_score = candidate.copy(), value
    return GridResult(best=best, best_score=best_score, evaluations=total)
