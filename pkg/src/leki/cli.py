"""Command-line entry point ``solve``.

``solve run <config> [--preset NAME] [--out DIR] [--seed N] [--workers K] [--json]``
``solve aggregate <trials.csv ...> [--metric NAME] [--out FILE]``
``solve check``
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .errors import ConfigurationError, LekiError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solve", description="Ensemble Kalman inversion with covariance localization")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file or preset")
    p_run.add_argument("config", nargs="?", help="TOML experiment config")
    p_run.add_argument("--preset", choices=("linear", "nonlinear", "lorenz96", "dc"))
    p_run.add_argument("--out", help="output directory (default: $LEKI_OUTPUT_DIR or ./results)")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    p_run.add_argument("--trials", type=int, help="override the number of trials")
    p_run.add_argument("--json", action="store_true", help="also write JSON mirrors of every CSV")
    p_run.add_argument("--no-records", action="store_true", help="skip per-iteration CSV files")

    p_agg = sub.add_parser("aggregate", help="summarise one or more *_trials.csv files")
    p_agg.add_argument("records", nargs="+")
    p_agg.add_argument("--metric", help="metric column to summarise (default per experiment)")
    p_agg.add_argument("--out", help="write the summary CSV here instead of stdout")

    sub.add_parser("check", help="run the built-in numerical self-checks")
    return parser


def _cmd_run(args) -> int:
    from .harness import load_config, load_preset, resolve_output_dir, run_experiment, write_result

    if args.config and args.preset:
        raise ConfigurationError("give either a config file or --preset, not both")
    if not args.config and not args.preset:
        raise ConfigurationError("a config file or --preset is required")
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    if args.trials is not None:
        cfg = cfg.with_overrides(trials=args.trials)
    if args.workers < 1:
        raise ConfigurationError("--workers must be at least 1")
    result = run_experiment(cfg, workers=args.workers)
    out = resolve_output_dir(args.out)
    paths = write_result(result, out, mirror_json=args.json, per_iteration=not args.no_records)
    for rep in result.reports:
        counts = " ".join(f"{k}={v}" for k, v in rep.counts.items())
        mean = "nan" if rep.mean is None else f"{rep.mean:.4g}"
        print(f"{rep.experiment} d={rep.dim} J={rep.ensemble_size} {rep.method}: "
              f"mean {rep.metric}={mean} {counts}")
    print(f"wrote {len(paths)} files to {out}")
    return 0


def _cmd_aggregate(args) -> int:
    from .harness.io import aggregate_files, write_summary_csv, SUMMARY_COLUMNS, _summary_row

    reports = aggregate_files(args.records, args.metric)
    if args.out:
        write_summary_csv(args.out, reports)
    else:
        print(",".join(SUMMARY_COLUMNS))
        for r in reports:
            row = _summary_row(r)
            print(",".join("" if row[c] is None else str(row[c]) for c in SUMMARY_COLUMNS))
    return 0


def _cmd_check() -> int:
    from .selfcheck import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "aggregate":
            return _cmd_aggregate(args)
        return _cmd_check()
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except LekiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
