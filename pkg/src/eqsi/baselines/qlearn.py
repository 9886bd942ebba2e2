"""Branching Q-learning over discretized equalizer parameters.

One shared trunk feeds one head per parameter; each head scores the k
discrete levels of its dimension. Episodes are one step long, so the TD
target is the observed reward itself, copied to every head. Exploration
is per-head epsilon-greedy with a geometric epsilon decay, and the
learning rate drops by a fixed factor on a fixed epoch schedule.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, ParameterError
from ..nn import Adam, DenseNet, backward, forward


@dataclass
class QLearningConfig:
    k: int = 16
    replay: int = 50_000
    batch: int = 128
    eps_start: float = 1.0
    eps_decay: float = 0.975
    eps_floor: float = 0.005
    lr0: float = 1e-3
    lr_factor: float = 10.0
    lr_every: int = 25
    lr_floor: float = 1e-5
    stop_window: int = 20
    stop_std: float = 0.025
    max_epochs: int = 500
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError("need at least 2 levels per head")
        if min(self.eps_floor, self.lr0, self.lr_floor) <= 0:
            raise ParameterError("schedules must stay positive")


def eps_schedule(cfg: QLearningConfig, epoch: int) -> float:
    return max(cfg.eps_floor, cfg.eps_start * cfg.eps_decay**epoch)


def lr_schedule(cfg: QLearningConfig, epoch: int) -> float:
    return max(cfg.lr_floor, cfg.lr0 / cfg.lr_factor ** (epoch // cfg.lr_every))


def decode_levels(levels: np.ndarray, k: int) -> np.ndarray:
    """Uniform level mapping: index 0 -> 0.0, index k-1 -> 1.0."""
    return np.asarray(levels, dtype=np.float64) / (k - 1)


def shared_target(reward: float, d: int) -> np.ndarray:
    """One-step TD target for a branching network: episodes end after a
    single action, so the target is the reward itself and every action
    head regresses toward the same value."""
    return np.full(d, float(reward))


@dataclass
class BranchingQNet:
    trunk: DenseNet
    heads: list[DenseNet]

    @classmethod
    def create(cls, state_dim: int, d: int, k: int, hidden: tuple[int, ...], seed: int) -> "BranchingQNet":
        trunk = DenseNet.create([state_dim, *hidden], ["relu"] * len(hidden), seed=seed)
        heads = [DenseNet.create([hidden[-1], k], ["linear"], seed=seed + 1 + i) for i in range(d)]
        return cls(trunk=trunk, heads=heads)

    @property
    def d(self) -> int:
        return len(self.heads)

    def parameters(self) -> list[np.ndarray]:
        out = self.trunk.parameters()
        for head in self.heads:
            out.extend(head.parameters())
        return out

    def q_values(self, s: np.ndarray) -> np.ndarray:
        """(d, k) table for one state or (B, d, k) for a batch."""
        squeezed = np.asarray(s).ndim == 1
        h, _ = forward(self.trunk, np.atleast_2d(s))
        q = np.stack([forward(head, h)[0] for head in self.heads], axis=1)
        return q[0] if squeezed else q


@dataclass
class QResult:
    levels: np.ndarray
    params: np.ndarray
    reward_trace: list = field(default_factory=list)
    eps_trace: list = field(default_factory=list)
    lr_trace: list = field(default_factory=list)
    evaluations: int = 0
    epochs: int = 0
    stopped_early: bool = False


def _update(net: BranchingQNet, opt: Adam, batch, cfg: QLearningConfig) -> None:
    s = np.vstack([b[0] for b in batch])
    levels = np.vstack([b[1] for b in batch])
    r = np.array([b[2] for b in batch], dtype=np.float64)
    b_n = len(batch)
    rows = np.arange(b_n)

    # vectorized form of shared_target: each head chases the same reward
    h, t_trunk = forward(net.trunk, s)
    dh = np.zeros_like(h)
    head_grads: list[np.ndarray] = []
    for i, head in enumerate(net.heads):
        q, t_head = forward(head, h)
        td = q[rows, levels[:, i]] - r
        dq = np.zeros_like(q)
        dq[rows, levels[:, i]] = 2.0 * td / (b_n * net.d)
        g_head, dh_i = backward(head, t_head, dq)
        head_grads.extend(g_head)
        dh += dh_i
    g_trunk, _ = backward(net.trunk, t_trunk, dh)
    opt.step(g_trunk + head_grads)


def greedy_levels(net: BranchingQNet, s: np.ndarray) -> np.ndarray:
    return np.argmax(net.q_values(s), axis=-1).astype(np.int64)


def run_qlearning(env, states: np.ndarray, d: int, cfg: QLearningConfig | None = None, seed: int = 0) -> QResult:
    """One-step episodes over `states`; env(i, levels) -> reward.

    Stops when the epoch-average rewards of the trailing stop_window
    epochs have standard deviation below stop_std, or at max_epochs. The
    returned greedy action is taken at the mean state.
    """
    cfg = cfg or QLearningConfig()
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    if states.shape[0] == 0:
        raise DataError("need at least one episode state")
    rng = np.random.default_rng(seed)
    net = BranchingQNet.create(states.shape[1], d, cfg.k, cfg.hidden, seed)
    opt = Adam(net.parameters(), lr=cfg.lr0, nets=[net.trunk, *net.heads])
    replay: deque = deque(maxlen=cfg.replay)
    result = QResult(levels=np.zeros(d, dtype=np.int64), params=np.zeros(d))

    for epoch in range(cfg.max_epochs):
        eps = eps_schedule(cfg, epoch)
        opt.lr = lr_schedule(cfg, epoch)
        rewards = []
        for i in rng.permutation(states.shape[0]):
            s = states[i]
            levels = greedy_levels(net, s)
            explore = rng.uniform(size=d) < eps
            if explore.any():
                levels = levels.copy()
                levels[explore] = rng.integers(0, cfg.k, size=int(explore.sum()))
            r = float(env(int(i), levels))
            result.evaluations += 1
            rewards.append(r)
            replay.append((s, levels, r))
            if len(replay) >= cfg.batch:
                picks = rng.integers(0, len(replay), size=cfg.batch)
                _update(net, opt, [replay[p] for p in picks], cfg)
        result.reward_trace.append(float(np.mean(rewards)))
        result.eps_trace.append(eps)
        result.lr_trace.append(opt.lr)
        result.epochs = epoch + 1
        window = result.reward_trace[-cfg.stop_window :]
        if len(window) == cfg.stop_window and float(np.std(window)) < cfg.stop_std:
            result.stopped_early = True
            break

    result.levels = greedy_levels(net, states.mean(axis=0))
    result.params = decode_levels(result.levels, cfg.k)
    return result
