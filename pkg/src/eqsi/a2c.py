"""One-step episodic advantage actor-critic over equalizer actions.

Each labeled segment is an independent episode: encode it, sample one
action from a diagonal Gaussian whose mean is a sigmoid-squashed actor
output, equalize, re-encode, and collect the negative latent distance as
reward. The critic supplies a value baseline; the joint loss mixes the
policy term, a one-step TD value term, and an entropy bonus.

Gradient detachment rules: the advantage is a constant in the policy
term, and the value target r + gamma*V(s_next) is a constant in the
critic term. Log-densities are evaluated at the pre-clip sample; the
executed action is the clipped one, and both are kept per transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equalizer import ActionVector, ParamRanges, apply_chain, params_from_action
from .errors import DataError, ShapeError
from .latent import AnchorPoint, AutoencoderBundle, encode, encode_matrix
from .nn import Adam, DenseNet, backward, forward, load_checkpoint, save_checkpoint

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
HALF_LOG_2PIE = 0.5 * np.log(2.0 * np.pi * np.e)


@dataclass
class A2CConfig:
    lr: float = 5e-4
    gamma: float = 0.98
    beta: float = 1e-2
    c_v: float = 0.5
    epochs: int = 300
    batch: int = 64
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    log_std_init: float = -0.5
    early_stop_eps: float = 1e-4
    early_stop_epochs: int = 20
    max_updates: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ShapeError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.beta < 0 or self.c_v < 0:
            raise ShapeError("beta and c_v must be nonnegative")


@dataclass
class PolicyOutput:
    mean: np.ndarray
    log_std: np.ndarray


@dataclass
class Transition:
    s_curr: np.ndarray
    a_exec: np.ndarray
    a_raw: np.ndarray
    r: float
    s_next: np.ndarray
    # Episode ends after this step: the TD target bootstraps V(s_next) = 0,
    # so the critic regresses toward the reward scale instead of the
    # continuing-task fixed point r/(1-gamma), which short runs never reach.
    terminal: bool = False
    v_curr: float | None = None
    v_next: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r > 0.0:
            raise DataError(f"reward must be finite and <= 0, got {self.r}")


@dataclass
class Agent:
    actor: DenseNet
    critic: DenseNet
    log_std: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.actor.in_dim

    @property
    def action_dim(self) -> int:
        return self.actor.out_dim

    def parameters(self) -> list[np.ndarray]:
        return self.actor.parameters() + self.critic.parameters() + [self.log_std]

    def save(self, path, extra: dict | None = None) -> None:
        payload = {"log_std": self.log_std.tolist()}
        payload.update(extra or {})
        save_checkpoint(path, {"actor": self.actor, "critic": self.critic}, extra=payload)

    @classmethod
    def load(cls, path) -> "Agent":
        blob = load_checkpoint(path)
        return cls(
            actor=blob["nets"]["actor"],
            critic=blob["nets"]["critic"],
            log_std=np.asarray(blob["extra"]["log_std"], dtype=np.float64),
        )


def create_agent(state_dim: int, action_dim: int, cfg: A2CConfig | None = None, seed: int | None = None) -> Agent:
    cfg = cfg or A2CConfig()
    seed = cfg.seed if seed is None else seed
    n_h = len(cfg.hidden)
    actor = DenseNet.create(
        [state_dim, *cfg.hidden, action_dim], ["relu"] * n_h + ["sigmoid"], seed=seed
    )
    critic = DenseNet.create([state_dim, *cfg.hidden, 1], ["relu"] * n_h + ["linear"], seed=seed + 1)
    return Agent(actor=actor, critic=critic, log_std=np.full(action_dim, cfg.log_std_init))


def policy(agent: Agent, s: np.ndarray) -> PolicyOutput:
    """Mean in [0,1]^d (sigmoid head) and the clamped per-dimension log std."""
    mean, _ = forward(agent.actor, np.asarray(s, dtype=np.float64))
    return PolicyOutput(mean=mean, log_std=np.clip(agent.log_std, LOG_STD_MIN, LOG_STD_MAX))


def sample_action(agent: Agent, s, rng: np.random.Generator, return_raw: bool = False):
    """Draw a ~ N(mean(s), diag(sigma^2)) and clip it into the unit box."""
    s = np.asarray(getattr(s, "z", s), dtype=np.float64)
    out = policy(agent, s)
    raw = out.mean + np.exp(out.log_std) * rng.normal(size=agent.action_dim)
    action = ActionVector(tuple(raw))
    if return_raw:
        return action, raw
    return action


def log_prob(agent: Agent, s, a_raw: np.ndarray) -> float:
    """Diagonal-Gaussian log density of the pre-clip sample."""
    out = policy(agent, np.asarray(getattr(s, "z", s), dtype=np.float64))
    sigma2 = np.exp(2.0 * out.log_std)
    delta = np.asarray(a_raw) - out.mean
    return float(np.sum(-out.log_std - HALF_LOG_2PI - delta**2 / (2.0 * sigma2)))


def entropy_of(log_std: np.ndarray) -> float:
    """Entropy of the diagonal Gaussian: sum_i (log sigma_i + 0.5*log(2*pi*e))."""
    ls = np.clip(np.asarray(log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX)
    return float(np.sum(ls + HALF_LOG_2PIE))


def compute_reward(
    anchor: AnchorPoint,
    bundle: AutoencoderBundle,
    segment,
    action: ActionVector,
    ranges: ParamRanges,
) -> tuple[float, np.ndarray]:
    """Equalize the segment with the mapped action, re-encode, and score.

    Returns (reward, next latent); reward = -||anchor - latent(eq)||."""
    ctle, dfe = params_from_action(action, ranges)
    equalized = apply_chain(segment, ctle, dfe)
    z = encode(bundle, equalized).z
    return -float(np.linalg.norm(anchor.c - z)), z


def compute_advantage(r: float, gamma: float, v_curr: float, v_next: float) -> float:
    return r + gamma * v_next - v_curr


def _stack(transitions: list[Transition]):
    s = np.vstack([t.s_curr for t in transitions])
    s_next = np.vstack([t.s_next for t in transitions])
    a_raw = np.vstack([t.a_raw for t in transitions])
    r = np.array([t.r for t in transitions], dtype=np.float64)
    live = np.array([not t.terminal for t in transitions], dtype=np.float64)
    return s, s_next, a_raw, r, live


def a2c_loss_frozen(
    agent: Agent,
    transitions: list[Transition],
    cfg: A2CConfig,
    advantages: np.ndarray,
    targets: np.ndarray,
) -> float:
    """Joint loss with the advantage and value target held constant.

    This is the function whose exact gradient a2c_loss returns; finite
    differences of it validate the analytic gradients.
    """
    s, _, a_raw, _, _ = _stack(transitions)
    mean, _ = forward(agent.actor, s)
    ls = np.clip(agent.log_std, LOG_STD_MIN, LOG_STD_MAX)
    sigma2 = np.exp(2.0 * ls)
    delta = a_raw - mean
    logp = np.sum(-ls - HALF_LOG_2PI - delta**2 / (2.0 * sigma2), axis=1)
    v_curr, _ = forward(agent.critic, s)
    td = targets - v_curr[:, 0]
    ent = float(np.sum(ls + HALF_LOG_2PIE))
    return float(-np.mean(advantages * logp) + 0.5 * cfg.c_v * np.mean(td**2) - cfg.beta * ent)


def a2c_loss(
    agent: Agent, transitions: list[Transition], cfg: A2CConfig
) -> tuple[float, list[np.ndarray], dict]:
    """Loss, exact gradients aligned with agent.parameters(), and term
    breakdown. Fills each transition's critic value fields."""
    if not transitions:
        raise DataError("a2c_loss needs a non-empty batch")
    s, s_next, a_raw, r, live = _stack(transitions)
    b = len(transitions)

    v_curr_col, t_curr = forward(agent.critic, s)
    v_next_col, _ = forward(agent.critic, s_next)
    v_curr, v_next = v_curr_col[:, 0], v_next_col[:, 0] * live
    targets = r + cfg.gamma * v_next
    td = targets - v_curr
    advantages = td.copy()
    if b > 1:
        # Batch-mean control variate: E[mean(A)*grad log pi] = 0, so the
        # policy gradient stays unbiased while losing the common offset an
        # unconverged critic injects; without it every early advantage is
        # negative and the mean gets repelled from its own samples, which
        # at a box face always points outward.
        advantages -= advantages.mean()
    for t, vc, vn in zip(transitions, v_curr, v_next):
        t.v_curr, t.v_next = float(vc), float(vn)

    mean, t_act = forward(agent.actor, s)
    ls = np.clip(agent.log_std, LOG_STD_MIN, LOG_STD_MAX)
    sigma2 = np.exp(2.0 * ls)
    delta = a_raw - mean
    logp = np.sum(-ls - HALF_LOG_2PI - delta**2 / (2.0 * sigma2), axis=1)
    ent = float(np.sum(ls + HALF_LOG_2PIE))

    policy_term = float(-np.mean(advantages * logp))
    value_term = float(0.5 * cfg.c_v * np.mean(td**2))
    entropy_term = float(-cfg.beta * ent)
    loss = policy_term + value_term + entropy_term

    # actor: d loss / d mean = -(A/b) * delta / sigma^2
    d_mean = -(advantages[:, None] / b) * delta / sigma2
    g_actor, _ = backward(agent.actor, t_act, d_mean)
    # critic: value target detached, so only V(s_curr) carries gradient
    d_v = (-cfg.c_v * td / b)[:, None]
    g_critic, _ = backward(agent.critic, t_curr, d_v)
    # log_std: policy and entropy terms; flat outside the clamp interval
    d_ls_policy = -np.sum(advantages[:, None] * (-1.0 + delta**2 / sigma2), axis=0) / b
    d_ls = d_ls_policy - cfg.beta
    live = (agent.log_std > LOG_STD_MIN) & (agent.log_std < LOG_STD_MAX)
    d_ls = np.where(live, d_ls, 0.0)

    grads = g_actor + g_critic + [d_ls]
    aux = {
        "policy": policy_term,
        "value": value_term,
        "entropy": ent,
        "advantages": advantages,
        "targets": targets,
    }
    return loss, grads, aux


@dataclass
class TrainResult:
    reward_trace: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    policy_trace: list = field(default_factory=list)
    value_trace: list = field(default_factory=list)
    entropy_trace: list = field(default_factory=list)
    updates: int = 0
    rollouts: int = 0
    stopped_early: bool = False


def train_env(agent: Agent, env, states: np.ndarray, cfg: A2CConfig) -> TrainResult:
    """Core loop over an arbitrary one-step environment.

    `states` is an (m, l) matrix of episode start states; env(i, action)
    returns (reward, next state) for episode index i. Early stop fires
    after early_stop_epochs consecutive epochs whose mean reward moved by
    less than early_stop_eps.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(agent.parameters(), lr=cfg.lr, nets=[agent.actor, agent.critic])
    result = TrainResult()
    m = states.shape[0]
    prev_reward = None
    streak = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        ep_rewards = []
        ep_loss, ep_policy, ep_value, ep_entropy, n_batches = 0.0, 0.0, 0.0, 0.0, 0
        for lo in range(0, m, cfg.batch):
            rows = order[lo : lo + cfg.batch]
            transitions = []
            for i in rows:
                action, raw = sample_action(agent, states[i], rng, return_raw=True)
                r, s_next = env(int(i), action)
                s_next = np.asarray(getattr(s_next, "z", s_next), dtype=np.float64)
                transitions.append(
                    Transition(
                        s_curr=states[i],
                        a_exec=action.a,
                        a_raw=raw,
                        r=float(r),
                        s_next=s_next,
                        terminal=True,
                    )
                )
            loss, grads, aux = a2c_loss(agent, transitions, cfg)
            opt.step(grads)
            result.updates += 1
            result.rollouts += len(transitions)
            ep_rewards.extend(t.r for t in transitions)
            ep_loss += loss
            ep_policy += aux["policy"]
            ep_value += aux["value"]
            ep_entropy += aux["entropy"]
            n_batches += 1
            if cfg.max_updates is not None and result.updates >= cfg.max_updates:
                break
        mean_reward = float(np.mean(ep_rewards))
        result.reward_trace.append(mean_reward)
        result.loss_trace.append(ep_loss / n_batches)
        result.policy_trace.append(ep_policy / n_batches)
        result.value_trace.append(ep_value / n_batches)
        result.entropy_trace.append(ep_entropy / n_batches)
        if cfg.max_updates is not None and result.updates >= cfg.max_updates:
            break
        if prev_reward is not None and abs(mean_reward - prev_reward) < cfg.early_stop_eps:
            streak += 1
            if streak >= cfg.early_stop_epochs:
                result.stopped_early = True
                break
        else:
            streak = 0
        prev_reward = mean_reward
    return result


def train(
    agent: Agent,
    dataset,
    bundle: AutoencoderBundle,
    anchor: AnchorPoint,
    cfg: A2CConfig,
    ranges: ParamRanges,
) -> TrainResult:
    """Train on a labeled dataset: every segment is a one-step episode."""
    states = encode_matrix(bundle, dataset.matrix)
    segments = dataset.segments

    def env(i, action):
        return compute_reward(anchor, bundle, segments[i], action, ranges)

    return train_env(agent, env, states, cfg)


def infer_action(agent: Agent, s) -> ActionVector:
    """Deterministic mean action."""
    out = policy(agent, np.asarray(getattr(s, "z", s), dtype=np.float64))
    return ActionVector(tuple(out.mean))


def infer_params(agent: Agent, s, ranges: ParamRanges):
    """Mean action mapped to physical equalizer parameters."""
    return params_from_action(infer_action(agent, s), ranges)
