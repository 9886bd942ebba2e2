"""Comparison optimizers sharing the equalizer and metric stack."""

from .ber import compute_ber
from .ddpg import DDPGConfig, DDPGResult, rollout, run_ddpg
from .ga import GAConfig, GAResult, roulette_pick, run_ga
from .grid import GridResult, run_grid
from .pso import PSOResult, SwarmConfig, run_pso
from .qlearn import (
    BranchingQNet,
    QLearningConfig,
    QResult,
    decode_levels,
    eps_schedule,
    greedy_levels,
    lr_schedule,
    run_qlearning,
    shared_target,
)

__all__ = [
    "BranchingQNet",
    "DDPGConfig",
    "DDPGResult",
    "GAConfig",
    "GAResult",
    "GridResult",
    "PSOResult",
    "QLearningConfig",
    "QResult",
    "SwarmConfig",
    "compute_ber",
    "decode_levels",
    "eps_schedule",
    "greedy_levels",
    "lr_schedule",
    "rollout",
    "roulette_pick",
    "run_ddpg",
    "run_ga",
    "run_grid",
    "run_pso",
    "run_qlearning",
    "shared_target",
]
