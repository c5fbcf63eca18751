"""Train PPO for a short while on the default scene and compare with the baselines.

    python demos/quickstart.py --episodes 60 --seed 0

Prints the mean reward (constraint-gated EE, bit/J) per tenth of the run
for PPO, and the converged value for the random and greedy policies on
the same channel draws.
"""

import argparse

import numpy as np

from rsma_isac import BaselineConfig, IsacEnv, PpoConfig, Scenario, make_learner, run_baseline, train
from rsma_isac.ppo import converged


def deciles(values):
    chunks = np.array_split(np.asarray(values), 10)
    return " ".join(f"{c.mean():6.2f}" for c in chunks if len(c))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = PpoConfig(episodes=args.episodes)
    env = IsacEnv(Scenario())
    print(f"state dim {env.state_dim}, action dim {env.action_dim}")

    trace = train(env, make_learner(env, cfg, args.seed), cfg, seed=args.seed)
    print("PPO reward by tenth of the run:", deciles(trace.mean_reward))
    print(f"PPO    converged EE {converged(trace.mean_reward):.3f}, "
          f"violations {converged(trace.violation_fraction):.0%}")

    for kind in ("random", "greedy"):
        bl = run_baseline(IsacEnv(Scenario()),
                          BaselineConfig(kind=kind, episodes=args.episodes), seed=args.seed)
        print(f"{kind:6s} converged EE {converged(bl.mean_reward):.3f}, "
              f"violations {converged(bl.violation_fraction):.0%}")


if __name__ == "__main__":
    main()
