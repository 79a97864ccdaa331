"""Command line interface.

Subcommands: simulate, classify, reliability, impute, full-obs, degrade,
report. Exit codes: 0 success, 1 configuration error, 2 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .configs import PRESETS, load_config, with_overrides
from .data import load_csv, save_csv
from .degrade import DegradeSpec, apply_degrade
from .errors import (ConfigError, EvaluationError, ImputationError,
                     IngestionError, MetricError, TrainingDivergenceError)
from .harness import run_experiment, write_report_csv

TASK_COMMANDS = {
    "simulate": ("simulate", "simulation"),
    "classify": ("classify", "bc-classify"),
    "reliability": ("classify-reliability", "bc-reliability"),
    "impute": ("impute", "bc-impute"),
    "full-obs": ("classify-full-obs", "bc-full-obs"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modnet")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in TASK_COMMANDS:
        p = sub.add_parser(command, help=f"run the {command} experiment")
        p.add_argument("--config", default=None,
                       help="JSON config path or preset name "
                            f"(presets: {', '.join(sorted(PRESETS))})")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")

    p = sub.add_parser("degrade", help="apply a degradation recipe to a CSV")
    p.add_argument("--input", required=True, help="input dataset CSV")
    p.add_argument("--paradigm", required=True,
                   choices=["random", "top-quantile", "train-quartile"])
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="degraded CSV path")

    p = sub.add_parser("report", help="re-render report.csv from a report.json")
    p.add_argument("--input", required=True, help="report.json path")
    p.add_argument("--out", required=True, help="report.csv path")
    return parser


def _run_task(args, task: str, default_preset: str) -> int:
    cfg = load_config(args.config if args.config else default_preset)
    if cfg.task != task:
        raise ConfigError(f"config task {cfg.task!r} does not match command ({task})")
    cfg = with_overrides(cfg, seed=args.seed, out=args.out)
    run_experiment(cfg)
    print(f"wrote results to {cfg.out}")
    return 0


def _run_degrade(args) -> int:
    import numpy as np
    from dataclasses import replace

    ds = load_csv(args.input)
    if args.split not in ds.split:
        # CSV rows are tagged "train" on load; retag so the injector sees them
        ds = replace(ds, split=np.full(ds.n, args.split))
    spec = DegradeSpec(args.paradigm, args.level, seed=args.seed)
    out = apply_degrade(ds, spec)
    save_csv(args.out, out)
    print(f"wrote degraded dataset to {args.out}")
    return 0


def _run_report(args) -> int:
    try:
        with open(args.input) as fh:
            report = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"report file not found: {args.input}")
    write_report_csv(report, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        if args.command in TASK_COMMANDS:
            task, preset = TASK_COMMANDS[args.command]
            return _run_task(args, task, preset)
        if args.command == "degrade":
            return _run_degrade(args)
        if args.command == "report":
            return _run_report(args)
        return 1
    except (ConfigError, IngestionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDivergenceError, EvaluationError, MetricError,
            ImputationError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
