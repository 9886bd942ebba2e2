"""Sequential DDPG: one episode fixes the d equalizer parameters one at
a time. The state is the vector of parameters chosen so far, zero-padded
to length d; intermediate rewards are zero and the terminal reward is
100 * (1 - BER) of the fully parameterized equalizer.

Actor and critic both carry target copies refreshed by soft updates.
Exploration adds clipped Gaussian noise to the actor output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, ParameterError
from ..nn import Adam, DenseNet, Layer, backward, forward


@dataclass
class DDPGConfig:
    replay: int = 50_000
    batch: int = 64
    gamma: float = 0.98
    tau: float = 0.005
    noise_std: float = 0.075
    noise_clip: float = 0.025
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    episodes: int = 150
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ParameterError("tau must lie in (0, 1)")
        if self.noise_clip < 0:
            raise ParameterError("noise clip bound must be nonnegative")


@dataclass
class DDPGResult:
    params: np.ndarray
    best_params: np.ndarray
    best_reward: float
    reward_trace: list = field(default_factory=list)
    noise_trace: list = field(default_factory=list)
    evaluations: int = 0


def _clone(net: DenseNet) -> DenseNet:
    return DenseNet(
        [Layer(w=l.w.copy(), b=l.b.copy(), act=l.act, act_scale=l.act_scale) for l in net.layers]
    )


def _soft_update(target: DenseNet, source: DenseNet, tau: float) -> None:
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - tau
        t += tau * s


def draw_noise(rng: np.random.Generator, cfg: DDPGConfig) -> float:
    return float(np.clip(rng.normal(0.0, cfg.noise_std), -cfg.noise_clip, cfg.noise_clip))


def rollout(actor: DenseNet, d: int, rng: np.random.Generator | None = None, cfg: DDPGConfig | None = None):
    """Run one sequential episode.

    Returns (params, states, actions, noises); states[j] is the zero-padded
    state the j-th action was chosen from. Pass rng=None for the
    deterministic (noise-free) policy.
    """
    cfg = cfg or DDPGConfig()
    s = np.zeros(d)
    states, actions, noises = [], [], []
    for j in range(d):
        a, _ = forward(actor, s)
        a = float(a[0])
        noise = draw_noise(rng, cfg) if rng is not None else 0.0
        a_exec = float(np.clip(a + noise, 0.0, 1.0))
        states.append(s.copy())
        actions.append(a_exec)
        noises.append(noise)
        s = s.copy()
        s[j] = a_exec
    return s, states, actions, noises


def _update(actor, critic, actor_t, critic_t, opt_a, opt_c, replay, rng, cfg):
    picks = rng.integers(0, len(replay), size=cfg.batch)
    batch = [replay[p] for p in picks]
    s = np.vstack([b[0] for b in batch])
    a = np.array([b[1] for b in batch])[:, None]
    r = np.array([b[2] for b in batch])
    s2 = np.vstack([b[3] for b in batch])
    done = np.array([b[4] for b in batch], dtype=np.float64)
    b_n = len(batch)

    a2, _ = forward(actor_t, s2)
    q2, _ = forward(critic_t, np.hstack([s2, a2]))
    y = r + cfg.gamma * (1.0 - done) * q2[:, 0]

    q, t_c = forward(critic, np.hstack([s, a]))
    dq = (2.0 * (q[:, 0] - y) / b_n)[:, None]
    g_c, _ = backward(critic, t_c, dq)
    opt_c.step(g_c)

    a_pred, t_a = forward(actor, s)
    q_a, t_c2 = forward(critic, np.hstack([s, a_pred]))
    _, dx = backward(critic, t_c2, np.full_like(q_a, -1.0 / b_n))
    g_a, _ = backward(actor, t_a, dx[:, -1:])
    opt_a.step(g_a)

    _soft_update(actor_t, actor, cfg.tau)
    _soft_update(critic_t, critic, cfg.tau)


def run_ddpg(env, d: int, cfg: DDPGConfig | None = None, seed: int = 0) -> DDPGResult:
    """env(params in [0,1]^d) -> BER in [0,1]; maximizes 100 * (1 - BER)."""
    cfg = cfg or DDPGConfig()
    rng = np.random.default_rng(seed)
    actor = DenseNet.create([d, *cfg.hidden, 1], ["relu"] * len(cfg.hidden) + ["sigmoid"], seed=seed)
    critic = DenseNet.create([d + 1, *cfg.hidden, 1], ["relu"] * len(cfg.hidden) + ["linear"], seed=seed + 1)
    actor_t, critic_t = _clone(actor), _clone(critic)
    opt_a = Adam(actor.parameters(), lr=cfg.actor_lr, nets=[actor])
    opt_c = Adam(critic.parameters(), lr=cfg.critic_lr, nets=[critic])
    replay: list = []
    result = DDPGResult(params=np.zeros(d), best_params=np.zeros(d), best_reward=-np.inf)

    for _ in range(cfg.episodes):
        params, states, actions, noises = rollout(actor, d, rng, cfg)
        ber = float(env(params))
        if not 0.0 <= ber <= 1.0:
            raise DataError(f"BER must lie in [0, 1], got {ber}")
        result.evaluations += 1
        terminal = 100.0 * (1.0 - ber)
        result.reward_trace.append(terminal)
        result.noise_trace.extend(noises)
        if terminal > result.best_reward:
            result.best_reward = terminal
            result.best_params = params.copy()
        for j in range(d):
            s_next = states[j].copy()
            s_next[j] = actions[j]
            done = j == d - 1
            r = terminal if done else 0.0
            replay.append((states[j], actions[j], r, s_next, done))
            if len(replay) > cfg.replay:
                replay.pop(0)
        if len(replay) >= cfg.batch:
            _update(actor, critic, actor_t, critic_t, opt_a, opt_c, replay, rng, cfg)

    result.params, _, _, _ = rollout(actor, d, None, cfg)
    return result
