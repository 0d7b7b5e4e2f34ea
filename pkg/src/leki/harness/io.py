"""CSV (and optional JSON) output of experiment results.

Files per experiment:

* ``<exp>_d<dim>_J<J>_<method>_t<trial>.csv``: one row per iteration with the
  :class:`~leki.diagnostics.MetricsRow` columns; disabled diagnostics are empty.
* ``<exp>_trials.csv``: one row per run with its exit condition and final metrics.
* ``<exp>_summary.csv``: the aggregate report.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Iterable, List, Optional

from ..diagnostics import MetricsRow
from ..errors import ConfigurationError
from .experiments import EXIT_KINDS, AggregateReport, ExperimentResult, TrialResult, aggregate

__all__ = [
    "OUTPUT_ENV",
    "resolve_output_dir",
    "write_result",
    "read_trials_csv",
    "write_summary_csv",
    "TRIAL_COLUMNS",
    "SUMMARY_COLUMNS",
    "aggregate_files",
]

OUTPUT_ENV = "LEKI_OUTPUT_DIR"
TRIAL_COLUMNS = ["experiment", "dim", "ensemble_size", "method", "trial_id", "seed", "exit",
                 "input_hash"] + MetricsRow.columns()
SUMMARY_COLUMNS = ["experiment", "dim", "ensemble_size", "method", "metric", "trials", "mean",
                   "median", "std"] + [f"n_{k.replace('-', '_')}" for k in EXIT_KINDS]


def resolve_output_dir(cli_value: Optional[str] = None) -> Path:
    """``--out`` wins, then ``$LEKI_OUTPUT_DIR``, then ``./results``."""
    return Path(cli_value or os.environ.get(OUTPUT_ENV) or "results")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: Path, columns: List[str], rows: Iterable[dict], mirror_json: bool) -> None:
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(_fmt(r.get(c)) for c in columns)
    if mirror_json:
        clean = [{c: (None if isinstance(r.get(c), float) and not math.isfinite(r.get(c)) else r.get(c))
                  for c in columns} for r in rows]
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(clean, fh, indent=1, sort_keys=False)
            fh.write("\n")


def _trial_row(t: TrialResult) -> dict:
    row = {"experiment": t.experiment, "dim": t.dim, "ensemble_size": t.ensemble_size,
           "method": t.method, "trial_id": t.trial_id, "seed": t.seed_used, "exit": t.exit,
           "input_hash": t.input_hash}
    if t.final is not None:
        row.update(t.final.as_dict())
    return row


def _summary_row(r: AggregateReport) -> dict:
    row = {"experiment": r.experiment, "dim": r.dim, "ensemble_size": r.ensemble_size,
           "method": r.method, "metric": r.metric, "trials": r.trials, "mean": r.mean,
           "median": r.median, "std": r.std}
    row.update({f"n_{k.replace('-', '_')}": r.counts.get(k, 0) for k in EXIT_KINDS})
    return row


def write_summary_csv(path, reports: List[AggregateReport], mirror_json: bool = False) -> None:
    _write(Path(path), SUMMARY_COLUMNS, (_summary_row(r) for r in reports), mirror_json)


def write_result(result: ExperimentResult, out_dir, *, mirror_json: bool = False,
                 per_iteration: bool = True) -> List[Path]:
    """Write all CSV files of ``result`` into ``out_dir``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = result.config.experiment
    paths = []
    if per_iteration:
        for t in result.trials:
            if t.record is None:
                continue
            p = out / f"{exp}_d{t.dim}_J{t.ensemble_size}_{t.method}_t{t.trial_id:03d}.csv"
            _write(p, MetricsRow.columns(), (r.as_dict() for r in t.record.rows), mirror_json)
            paths.append(p)
    p = out / f"{exp}_trials.csv"
    _write(p, TRIAL_COLUMNS, (_trial_row(t) for t in result.trials), mirror_json)
    paths.append(p)
    p = out / f"{exp}_summary.csv"
    write_summary_csv(p, result.reports, mirror_json)
    paths.append(p)
    return paths


def _opt_float(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def read_trials_csv(path) -> List[TrialResult]:
    """Read a ``*_trials.csv`` file back into :class:`TrialResult` objects."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(TRIAL_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ConfigurationError(f"{path}: not a trials file (missing {sorted(missing)})")
            out = []
            for r in reader:
                final = None
                if r["iter"] != "":
                    vals = {c: _opt_float(r[c]) for c in MetricsRow.columns()}
                    vals["iter"] = int(vals["iter"])
                    final = MetricsRow(**vals)
                out.append(TrialResult(r["experiment"], int(r["dim"]), int(r["ensemble_size"]),
                                       r["method"], int(r["trial_id"]), int(r["seed"]), r["exit"],
                                       final, None, r["input_hash"]))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(f"{path}: malformed row ({exc})") from exc
    return out


def aggregate_files(paths, metric: Optional[str] = None) -> List[AggregateReport]:
    trials = []
    for p in paths:
        trials.extend(read_trials_csv(p))
    return aggregate(trials, metric)
