"""PPO with a diagonal Gaussian policy over raw action logits.

The learner follows the usual actor/critic split: the actor network gives the
policy mean, a free per-dimension log-std vector gives the spread, and the
critic regresses one-step TD targets. Updates use plain SGD on the clipped
surrogate with the one-step TD advantage ``r + discount V(s') - V(s)``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .approximator import DenseNetwork
from .env import IsacEnv

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
TRACE_COLUMNS = ("episode", "mean_reward", "mean_ee", "mean_sum_rate", "mean_echo_snr_db",
                 "violation_fraction")


class TrainingDivergence(FloatingPointError):
    pass


@dataclass(frozen=True)
class PpoConfig:
    # actions never influence the channel, so the task is a contextual bandit;
    # a nonzero discount lets the critic's slope in the previous-action
    # entries of s' leak into the actor and destabilise it
    discount: float = 0.0
    clip: float = 0.2
    minibatch: int = 64
    lr_actor: float = 5e-3
    lr_critic: float = 1e-3
    epochs: int = 10
    episode_length: int = 100
    episodes: int = 500
    log_std_init: float = math.log(0.5)
    hidden: tuple = (128, 128)
    rollout: int | None = None      # transitions per update; defaults to episode_length
    normalize_advantages: bool = True
    reward_scale: float = 1.0
    log_std_bounds: tuple = (-5.0, 1.0)
    # global norm cap per minibatch step; without it the policy mean can be
    # carried past the power/QoS cliff once log_std has shrunk, after which
    # every sample is infeasible and no gradient brings it back
    max_grad_norm: float | None = 5.0
    # advantages are divided by max(std, floor) so an all-zero-reward batch
    # (critic noise only) is not blown up to unit scale
    advantage_std_floor: float = 1.0
    # output-layer init: actor weights scaled by this factor, critic weights zero
    actor_head_scale: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        if self.minibatch < 1 or self.epochs < 1:
            raise ValueError("minibatch and epochs must be >= 1")
        if self.episode_length < 1 or self.episodes < 1:
            raise ValueError("episode_length and episodes must be >= 1")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ValueError("max_grad_norm must be > 0")
        if self.advantage_std_floor < 0 or self.actor_head_scale < 0:
            raise ValueError("advantage_std_floor and actor_head_scale must be >= 0")

    @property
    def pool_capacity(self) -> int:
        return self.rollout or self.episode_length


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    logprob: float
    reward: float
    next_state: np.ndarray
    done: bool


class ExperiencePool:
    """On-policy buffer; cleared by :func:`update` after every policy update."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.items: list[Transition] = []

    def __len__(self):
        return len(self.items)

    @property
    def full(self) -> bool:
        return len(self.items) >= self.capacity

    def add(self, tr: Transition) -> None:
        if self.full:
            raise OverflowError("experience pool is full")
        self.items.append(tr)

    def clear(self) -> None:
        self.items.clear()

    def arrays(self):
        it = self.items
        return (np.array([t.state for t in it]), np.array([t.action for t in it]),
                np.array([t.logprob for t in it]), np.array([t.reward for t in it]),
                np.array([t.next_state for t in it]), np.array([t.done for t in it]))


def gaussian_logprob(action, mean, log_std):
    z = (np.asarray(action) - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z**2, axis=-1) - np.sum(log_std) - 0.5 * np.shape(mean)[-1] * LOG_2PI


class Learner:
    def __init__(self, state_dim: int, action_dim: int, config: PpoConfig = PpoConfig(), seed=None):
        rng = np.random.default_rng(seed)
        self.config = config
        self.actor = DenseNetwork((state_dim, *config.hidden, action_dim), rng)
        self.critic = DenseNetwork((state_dim, *config.hidden, 1), rng)
        # start from a near-constant policy mean and V = 0, so the first
        # updates follow rewards rather than the critic's random slope
        self.actor.weights[-1] *= config.actor_head_scale
        self.critic.weights[-1][...] = 0.0
        self.log_std = np.full(action_dim, float(config.log_std_init))

    def snapshot(self) -> "Learner":
        other = Learner.__new__(Learner)
        other.config = self.config
        other.actor, other.critic = self.actor.copy(), self.critic.copy()
        other.log_std = self.log_std.copy()
        return other

    def logprob(self, states, actions):
        return gaussian_logprob(actions, self.actor(states), self.log_std)

    def act(self, state, rng: np.random.Generator):
        mean = self.actor(state)
        action = mean + np.exp(self.log_std) * rng.standard_normal(mean.shape)
        return action, float(gaussian_logprob(action, mean, self.log_std))

    def value(self, states):
        return self.critic(states)[..., 0]

    def check_health(self) -> None:
        params = self.actor.params + self.critic.params + [self.log_std]
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergence("non-finite network parameters")


def advantage(r, v_next, v_now, discount: float):
    return r + discount * v_next - v_now


def probability_ratio(policy: Learner, old: Learner, states, actions):
    log_ratio = policy.logprob(states, actions) - old.logprob(states, actions)
    if not np.all(np.isfinite(log_ratio)):
        raise TrainingDivergence("non-finite policy density")
    return np.exp(log_ratio)


def clipped_objective(ratio, adv, clip: float):
    ratio, adv = np.asarray(ratio, dtype=float), np.asarray(adv, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv)


def surrogate_gradients(learner: Learner, states, actions, old_logprob, adv, clip: float):
    """Mean clipped objective over the batch and its gradients.

    Returns ``(objective, actor_grads, log_std_grad, ratio)``.
    """
    mean, acts = learner.actor.forward(states, keep=True)
    logp = gaussian_logprob(actions, mean, learner.log_std)
    ratio = np.exp(logp - old_logprob)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    n = len(adv)
    # the clipped branch is flat in theta wherever it is the strict minimum
    dobj_dlogp = np.where(unclipped <= clipped, unclipped, 0.0) / n
    inv_var = np.exp(-2.0 * learner.log_std)
    diff = actions - mean
    upstream = dobj_dlogp[:, None] * diff * inv_var
    grad_log_std = np.sum(dobj_dlogp[:, None] * (diff**2 * inv_var - 1.0), axis=0)
    grads = learner.actor.backward(states, upstream, acts)
    return float(np.mean(np.minimum(unclipped, clipped))), grads, grad_log_std, ratio


def value_gradients(learner: Learner, states, targets):
    v, acts = learner.critic.forward(states, keep=True)
    err = v[:, 0] - targets
    loss = 0.5 * float(np.mean(err**2))
    grads = learner.critic.backward(states, (err / len(err))[:, None], acts)
    return loss, grads


@dataclass
class UpdateDiagnostics:
    objective: float
    value_loss: float
    mean_ratio: float
    first_epoch_ratio: float
    epoch_value_losses: list = field(default_factory=list)


def clip_by_global_norm(grads, max_norm):
    """Rescale a list of arrays so their joint L2 norm is at most ``max_norm``."""
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm <= max_norm:
        return grads
    return [g * (max_norm / norm) for g in grads]


def update(learner: Learner, pool: ExperiencePool, rng: np.random.Generator,
           minibatch: int | None = None) -> UpdateDiagnostics:
    """Clipped-surrogate ascent for the actor, TD regression for the critic.

    Advantages and critic targets come from the critic as it stood before the
    first epoch. The pool is cleared afterwards.
    """
    cfg = learner.config
    lam = minibatch or cfg.minibatch
    if len(pool) < lam:
        raise ValueError(f"pool holds {len(pool)} transitions, need at least {lam}")
    S, A, LP, R, S2, _ = pool.arrays()
    R = R * cfg.reward_scale
    # truncated episodes: always bootstrap from V(s')
    targets = R + cfg.discount * learner.value(S2)
    adv = advantage(R, learner.value(S2), learner.value(S), cfg.discount)
    if cfg.normalize_advantages:
        scale = max(float(adv.std()), cfg.advantage_std_floor)
        adv = (adv - adv.mean()) / scale if scale > 1e-12 else np.zeros_like(adv)

    n = len(pool)
    objs, ratios, losses, epoch_losses = [], [], [], []
    first_ratio = None
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        ep_losses, ep_ratios = [], []
        for start in range(0, n, lam):
            idx = perm[start:start + lam]
            obj, grads, g_ls, ratio = surrogate_gradients(learner, S[idx], A[idx], LP[idx],
                                                          adv[idx], cfg.clip)
            *grads, g_ls = clip_by_global_norm(grads + [g_ls], cfg.max_grad_norm)
            learner.actor.sgd_step(grads, cfg.lr_actor, "ascend")
            learner.log_std = np.clip(learner.log_std + cfg.lr_actor * g_ls, *cfg.log_std_bounds)
            loss, vgrads = value_gradients(learner, S[idx], targets[idx])
            vgrads = clip_by_global_norm(vgrads, cfg.max_grad_norm)
            learner.critic.sgd_step(vgrads, cfg.lr_critic, "descend")
            objs.append(obj)
            ep_ratios.append(ratio.mean())
            ep_losses.append(loss)
        if first_ratio is None:
            first_ratio = float(np.mean(ep_ratios))
        ratios += ep_ratios
        losses += ep_losses
        epoch_losses.append(float(np.mean(ep_losses)))
    learner.check_health()
    pool.clear()
    return UpdateDiagnostics(objective=float(np.mean(objs)), value_loss=float(np.mean(losses)),
                             mean_ratio=float(np.mean(ratios)), first_epoch_ratio=first_ratio,
                             epoch_value_losses=epoch_losses)


@dataclass
class TrainingTrace:
    """Per-episode averages over steps."""

    mean_reward: list = field(default_factory=list)
    mean_ee: list = field(default_factory=list)
    mean_sum_rate: list = field(default_factory=list)
    mean_echo_snr_db: list = field(default_factory=list)
    violation_fraction: list = field(default_factory=list)
    mean_common_rate: list = field(default_factory=list)
    interactions: int = 0
    diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.mean_reward)

    def record_episode(self, steps: list) -> None:
        """``steps`` is a list of ``(reward, LinkMetrics)`` pairs."""
        rewards = np.array([r for r, _ in steps])
        ms = [m for _, m in steps]
        echo = float(np.mean([float(m.echo_snr) for m in ms]))
        self.mean_reward.append(float(rewards.mean()))
        self.mean_ee.append(float(np.mean([float(m.ee) for m in ms])))
        self.mean_sum_rate.append(float(np.mean([float(m.sum_rate) for m in ms])))
        self.mean_echo_snr_db.append(10.0 * math.log10(max(echo, 1e-30)))
        self.violation_fraction.append(float(np.mean([not bool(m.feasible) for m in ms])))
        self.mean_common_rate.append(float(np.mean([float(np.sum(m.common)) for m in ms])))
        self.interactions += len(steps)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for i in range(len(self)):
            yield (i + 1, self.mean_reward[i], self.mean_ee[i], self.mean_sum_rate[i],
                   self.mean_echo_snr_db[i], self.violation_fraction[i])

    def to_csv(self, path, policy: str | None = None) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS + (("policy",) if policy else ()))
            for row in self.rows():
                w.writerow([row[0], *(repr(float(x)) for x in row[1:])] + ([policy] if policy else []))

    @classmethod
    def from_csv(cls, path) -> "TrainingTrace":
        tr = cls()
        with open(Path(path), newline="") as fh:
            for rec in csv.DictReader(fh):
                tr.mean_reward.append(float(rec["mean_reward"]))
                tr.mean_ee.append(float(rec["mean_ee"]))
                tr.mean_sum_rate.append(float(rec["mean_sum_rate"]))
                tr.mean_echo_snr_db.append(float(rec["mean_echo_snr_db"]))
                tr.violation_fraction.append(float(rec["violation_fraction"]))
        return tr


def converged(values, fraction: float = 0.1) -> float:
    """Mean over the final ``fraction`` of the entries (at least one)."""
    values = np.asarray(values, dtype=float)
    n = max(1, int(math.ceil(fraction * len(values))))
    return float(values[-n:].mean())


def initial(values, fraction: float = 0.1) -> float:
    values = np.asarray(values, dtype=float)
    n = max(1, int(math.ceil(fraction * len(values))))
    return float(values[:n].mean())


def episode_seeds(master_seed: int, episodes: int) -> list:
    """Channel seeds per episode; shared by PPO and the baselines."""
    ss = np.random.SeedSequence([int(master_seed), 0])
    return [int(s) for s in ss.generate_state(episodes, dtype=np.uint64)]


def agent_rng(master_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), 1, stream]))


def make_learner(env: IsacEnv, config: PpoConfig, seed: int) -> Learner:
    return Learner(env.state_dim, env.action_dim, config,
                   np.random.SeedSequence([int(seed), 2]))


def train(env: IsacEnv, learner: Learner, config: PpoConfig | None = None, seed: int = 0,
          episodes: int | None = None) -> TrainingTrace:
    config = config or learner.config
    episodes = episodes or config.episodes
    act_rng, batch_rng = agent_rng(seed, 0), agent_rng(seed, 1)
    pool = ExperiencePool(config.pool_capacity)
    trace = TrainingTrace()
    for ep_seed in episode_seeds(seed, episodes):
        state = env.reset(ep_seed)
        steps = []
        for t in range(config.episode_length):
            action, logp = learner.act(state, act_rng)
            next_state, r, m = env.step(action)
            pool.add(Transition(state, action, logp, r, next_state, t == config.episode_length - 1))
            steps.append((r, m))
            state = next_state
            if pool.full:
                trace.diagnostics.append(update(learner, pool, batch_rng,
                                                min(config.minibatch, len(pool))))
        trace.record_episode(steps)
    return trace
