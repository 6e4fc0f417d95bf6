"""``rhlearn`` command line entry point.

Exit codes: 0 success, 1 computational failure, 2 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiment import (ComputationError, ConfigError, ExperimentConfig, RunOptions,
                         run)

log = logging.getLogger("rhlearn")

COMMANDS = {"synth": "synth", "cluster": "cluster", "transduce": "transduce",
            "noise-sweep": "noise_sweep"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhlearn",
        description="Regression-based hypergraph clustering and transduction.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads")
    parser.add_argument("--literal-eq3", action="store_true",
                        help="normalize similarities with M^1/2 S M^1/2")
    parser.add_argument("--two-fold", action="store_true",
                        help="average both folds of a stratified two-fold split")
    parser.add_argument("--dump-matrices", metavar="DIR",
                        help="write intermediate matrices (coefficients, S, H, w, L) as CSV")
    parser.add_argument("--output", help="override the config output path")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_file(args.config)
        task = COMMANDS[args.command]
        if cfg.task != task:
            if cfg.preset is not None:
                raise ConfigError(f"preset {cfg.preset!r} runs task {cfg.task!r}, "
                                  f"not {task!r}")
            cfg.task = task
        if args.seed is not None:
            cfg.seed = args.seed
        if args.literal_eq3:
            cfg.literal_eq3 = True
        if args.two_fold:
            cfg.two_fold = True
        if args.output:
            cfg.output = args.output
        cfg.validate()
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        opts = RunOptions(jobs=args.jobs,
                          dump_dir=Path(args.dump_matrices) if args.dump_matrices else None)
        report = run(cfg, opts)
    except ConfigError as exc:
        print(f"rhlearn: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rhlearn: I/O error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"rhlearn: computation failed: {exc}", file=sys.stderr)
        return 1
    if not cfg.output or task == "synth":
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        log.info("report written to %s", cfg.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
