"""Schlumberger sounding files.

CSV with header ``ab_over_2_m,apparent_resistivity_ohm_m,std_ohm_m`` and one
row per half-spacing.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Tuple

import numpy as np

from ..errors import ConfigurationError

__all__ = ["SOUNDING_COLUMNS", "read_sounding_csv", "write_sounding_csv"]

SOUNDING_COLUMNS = ("ab_over_2_m", "apparent_resistivity_ohm_m", "std_ohm_m")


def read_sounding_csv(path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-spacings, apparent resistivities and their standard deviations."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(SOUNDING_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")
            rows = [[float(r[c]) for c in SOUNDING_COLUMNS] for r in reader]
    except OSError as exc:
        raise ConfigurationError(f"cannot read data file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from exc
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    data = np.array(rows)
    if np.any(data <= 0):
        raise ConfigurationError(f"{path}: all values must be positive")
    return data[:, 0], data[:, 1], data[:, 2]


def write_sounding_csv(path, half_spacings, rho, stds) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SOUNDING_COLUMNS)
        for row in zip(half_spacings, rho, stds):
            w.writerow(repr(float(v)) for v in row)
