"""Reference policies for comparison with PPO.

Both baselines draw raw logits uniformly on ``[-3, 3]`` (``tanh(3)`` is
already within 0.5% of saturation) and run on the same environment and the
same per-episode channel seeds as the learner, so the traces are directly
comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import IsacEnv
from .ppo import TrainingTrace, agent_rng, episode_seeds

LOGIT_RANGE = 3.0


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "random"
    greedy_candidates: int = 32
    episodes: int = 500
    episode_length: int = 100

    def __post_init__(self):
        if self.kind not in ("random", "greedy"):
            raise ValueError("baseline kind must be 'random' or 'greedy'")
        if self.greedy_candidates < 1:
            raise ValueError("greedy_candidates must be >= 1")
        if self.episodes < 1 or self.episode_length < 1:
            raise ValueError("episodes and episode_length must be >= 1")


def _uniform_logits(rng, n, dim):
    return rng.uniform(-LOGIT_RANGE, LOGIT_RANGE, size=(n, dim))


def random_step(env: IsacEnv, rng: np.random.Generator):
    """One environment step with a uniformly drawn action.

    Returns ``(action, reward, metrics)``.
    """
    action = _uniform_logits(rng, 1, env.action_dim)[0]
    _, r, m = env.step(action)
    return action, r, m


def greedy_step(env: IsacEnv, rng: np.random.Generator, candidates: int = 32):
    """Best of ``candidates`` uniform actions by immediate reward.

    All candidates are scored on the current channel in one batch; the first
    index wins ties. Only the winner is stepped. With ``candidates=1`` this
    consumes the generator exactly like :func:`random_step`.
    """
    if candidates < 1:
        raise ValueError("candidates must be >= 1")
    actions = _uniform_logits(rng, candidates, env.action_dim)
    if candidates == 1:
        best = 0
    else:
        try:
            _, m = env.evaluate(actions)
            best = int(np.argmax(m.reward))
        except (ValueError, np.linalg.LinAlgError):
            # a degenerate candidate poisons the batch; score them one at a time
            rewards = []
            for a in actions:
                try:
                    rewards.append(float(env.evaluate(a)[1].reward))
                except (ValueError, np.linalg.LinAlgError):
                    rewards.append(0.0)
            best = int(np.argmax(rewards))
    _, r, m = env.step(actions[best])
    return actions[best], r, m


def run_baseline(env: IsacEnv, config: BaselineConfig, seed: int = 0) -> TrainingTrace:
    """Roll a baseline over ``config.episodes`` episodes with PPO's channel seeds."""
    rng = agent_rng(seed, 0)
    trace = TrainingTrace()
    for ep_seed in episode_seeds(seed, config.episodes):
        env.reset(ep_seed)
        steps = []
        for _ in range(config.episode_length):
            if config.kind == "random":
                _, r, m = random_step(env, rng)
            else:
                _, r, m = greedy_step(env, rng, config.greedy_candidates)
            steps.append((r, m))
        trace.record_episode(steps)
    return trace
