"""Command-line entry point: train, evaluate, bench, sweep.

Exit codes: 0 on success, 1 for config errors, 2 for runtime errors.
Set UAVMEC_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import harness
from .config import BASELINE_KINDS, ConfigError, load_config, replace_in_config


def _parse_value(text: str):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavmec",
                                     description="UAV-served edge-compute network: "
                                                 "training and benchmark harness")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train the agent per configured seed")
    _add_common(p)
    p.add_argument("--seed", type=int, default=None, help="run only this seed")
    p.add_argument("--resume", default=None, help="continue from a checkpoint")
    p.add_argument("--baseline", choices=BASELINE_KINDS, default=None,
                   help="override run.baseline (hybrid training)")
    p.add_argument("--hybrid", choices=("none", "alloc", "traj"), default=None,
                   help="override run.hybrid")

    p = sub.add_parser("evaluate", help="deterministic rollouts of a checkpoint "
                                        "or a pure baseline")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--baseline", choices=BASELINE_KINDS, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("bench", help="act/update latency over a terminal-count grid")
    _add_common(p)
    p.add_argument("--reps", type=int, default=100)

    p = sub.add_parser("sweep", help="run the experiment once per parameter value")
    _add_common(p)
    p.add_argument("--param", required=True, help="dotted key, e.g. reward.omega")
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("UAVMEC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.verb == "train":
            if args.baseline is not None:
                cfg = replace_in_config(cfg, "run.baseline", args.baseline)
            if args.hybrid is not None:
                cfg = replace_in_config(cfg, "run.hybrid", args.hybrid)
            summary = harness.run_experiment(cfg, out_dir=args.out,
                                             seed_override=args.seed,
                                             resume=args.resume)
        elif args.verb == "evaluate":
            summary = harness.evaluate(cfg, checkpoint=args.checkpoint,
                                       baseline=args.baseline,
                                       episodes=args.episodes,
                                       out_dir=args.out, seed=args.seed)
        elif args.verb == "bench":
            summary = harness.bench_latency(cfg, repetitions=args.reps)
            if args.out:
                from pathlib import Path
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "bench.json").write_text(json.dumps(summary, indent=2))
        else:
            values = [_parse_value(v) for v in args.values.split(",")]
            summary = harness.sweep(cfg, args.param, values, out_dir=args.out)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        logging.getLogger("uavmec").exception("run failed")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
