"""Command line entry point: ``rsma-isac {train,sweep,baseline,summarize}``.

Exit codes: 0 success, 2 usage error (argparse), 3 invalid configuration,
4 simulation or training failure, 5 file system error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .channel import dump_csv
from .env import IsacEnv
from .experiments import ConfigError, ExperimentConfig, load_config, run, summarize
from .ppo import episode_seeds

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 3, 4, 5

logger = logging.getLogger("rsma_isac")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsma-isac", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True):
        p.add_argument("--config", type=Path, help="YAML experiment file (defaults if omitted)")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
        p.add_argument("--sdma", action="store_true", help="run the SDMA variant only")
        if seeds:
            p.add_argument("--seed", type=_seed, action="append",
                           help="master seed; repeat for several (overrides the config list)")

    p = sub.add_parser("train", help="train PPO on the base configuration")
    common(p)
    p.add_argument("--dump-channel", type=Path, metavar="CSV",
                   help="also write the first episode's initial channel")
    p = sub.add_parser("sweep", help="run every sweep point, scheme, policy and seed")
    common(p)
    p = sub.add_parser("baseline", help="roll out a reference policy on the base configuration")
    common(p)
    p.add_argument("--policy", choices=("random", "greedy"), default="random")
    p = sub.add_parser("summarize", help="rebuild summary.csv and effects.csv from a run directory")
    p.add_argument("out", type=Path, nargs="?", help="run directory")
    p.add_argument("--out", dest="out_flag", type=Path, help=argparse.SUPPRESS)
    return parser


def _configure(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed:
        changes["seeds"] = tuple(args.seed)
    if args.sdma:
        changes["schemes"] = ("sdma",)
    if args.command in ("train", "baseline"):
        changes["sweep"] = {}
        changes["policies"] = ("ppo",) if args.command == "train" else (args.policy,)
    return replace(config, **changes) if changes else config


def _report(records) -> int:
    failed = [r for r in records if r.status != "ok"]
    for r in failed:
        print(f"{r.spec.label}: {r.error}", file=sys.stderr)
    print(f"{len(records) - len(failed)} of {len(records)} runs completed")
    return EXIT_RUNTIME if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "summarize":
            out = args.out or args.out_flag or Path("runs")
            summary, effects = summarize(out)
            missing = [e for e in effects if e["status"] != "ok"]
            print(f"{len(summary)} summary rows, {len(effects)} effect ratios written to {out}")
            for e in missing:
                print(f"effect {e['axis']} {e['from']}->{e['to']} ({e['context']}): {e['status']}",
                      file=sys.stderr)
            return EXIT_OK
        config = _configure(args)
        out = args.out or Path(config.out or "runs")
        if args.command == "train" and args.dump_channel:
            env = IsacEnv(config.scenario(sdma=args.sdma))
            env.reset(episode_seeds(config.seeds[0], 1)[0])
            dump_csv(env.channel, args.dump_channel)
        return _report(run(config, out, jobs=args.jobs))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
