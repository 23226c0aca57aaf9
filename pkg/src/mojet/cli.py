"""Command-line entry point.

Usage: ``mojet <experiment> [--config file.json] [--out dir] [--seed N]
[--plot-data] [--parallel]``. Exit codes: 0 success, 2 configuration error,
3 numeric failure, 4 data-file error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import serialize
from .errors import ConfigError, DataFileError, MojetError
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    default_config,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_DATA = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mojet",
        description="Jet-based rank and similarity diagnostics for modular pipelines",
    )
    parser.add_argument("experiment", choices=EXPERIMENT_NAMES)
    parser.add_argument("--config", help="JSON config file (overrides defaults)")
    parser.add_argument("--out", help="output directory (default mojet_out/<experiment>)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--plot-data", action="store_true",
        help="also emit a tidy long-format plotdata.csv",
    )
    parser.add_argument(
        "--parallel", action="store_true",
        help="estimate jets for base points concurrently",
    )
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        try:
            doc = serialize.load_json(args.config)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must contain a JSON object")
        doc.setdefault("experiment", args.experiment)
        if doc["experiment"] != args.experiment:
            raise ConfigError(
                f"config is for {doc['experiment']!r}, requested {args.experiment!r}"
            )
        cfg = ExperimentConfig.from_json_dict(doc)
    else:
        cfg = default_config(args.experiment)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.parallel:
        cfg = replace(cfg, parallel=True)
    out = args.out if args.out is not None else f"mojet_out/{args.experiment}"
    return replace(cfg, out_dir=out)


def _print_summary(report) -> None:
    for key, value in sorted(report.risk.items()):
        print(f"{key}: {value:.6g}")
    if report.diagnostics is not None:
        for pair, stats in sorted(report.diagnostics.jetsim_summary().items()):
            print(f"jetsim {'|'.join(pair)}: mean {stats['mean']:.6g}")
        for tap, stats in sorted(report.diagnostics.rank_summary().items()):
            print(f"rank {tap}: median {stats['median']:.6g}")
        for pair, flag in sorted(report.diagnostics.mirage_flags().items()):
            print(f"flag {'|'.join(pair)}: {flag}")
    for name, rows in report.tables.items():
        print(f"{name}: {len(rows)} rows")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        report = run_experiment(cfg, plot_data=args.plot_data)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFileError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MojetError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _print_summary(report)
    print(f"report written to {cfg.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
