"""How often does a uniformly random action satisfy each constraint?

    python demos/feasibility.py --channels 20 --actions 2000

The reward is zero unless all four constraints hold at once, so this is a
quick way to see which one makes the learning problem hard for a given
scene. Pass ``--config`` to look at a scene from a YAML file instead.
"""

import argparse

import numpy as np

from rsma_isac import IsacEnv
from rsma_isac.experiments import ExperimentConfig, load_config

NAMES = ("common rate", "user QoS", "power budget", "echo SNR")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--channels", type=int, default=20)
    ap.add_argument("--actions", type=int, default=2000)
    ap.add_argument("--sdma", action="store_true")
    args = ap.parse_args()

    config = load_config(args.config) if args.config else ExperimentConfig()
    env = IsacEnv(config.scenario(sdma=args.sdma))
    rng = np.random.default_rng(0)
    passed = np.zeros(len(NAMES))
    feasible, best = 0, []
    for ch in range(args.channels):
        env.reset(ch)
        _, m = env.evaluate(rng.uniform(-3, 3, (args.actions, env.action_dim)))
        passed += [np.count_nonzero(f) for f in m.flags]
        feasible += np.count_nonzero(m.feasible)
        best.append(float(m.reward.max()))
    total = args.channels * args.actions
    for name, count in zip(NAMES, passed):
        print(f"{name:13s} {count / total:7.2%}")
    print(f"{'all four':13s} {feasible / total:7.2%}")
    print(f"best sampled reward per channel: median {np.median(best):.2f}, max {max(best):.2f}")


if __name__ == "__main__":
    main()
