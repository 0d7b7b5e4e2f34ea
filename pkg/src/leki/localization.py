"""Localization matrices and localized (cross) covariances.

A localization matrix ``psi`` holds ``psi[i, j] = kernel(dist(i, j) / radius)``.
It tapers the parameter covariance by a Schur (elementwise) product, and the
cross covariance by one of four schemes:

``param-param-only``
    the cross covariance is used as estimated, only ``C^uu`` is tapered.
``centralized``
    output ``j`` sits at parameter index ``center_map[j]`` and column ``j`` of
    ``C^up`` is multiplied by ``psi[:, center_map[j]]``.
``linearized``
    ``C~^up = (psi o C^uu) H^T`` with ``H`` an (approximate) Jacobian.
``mixed``
    the first ``split_index`` outputs are centralized, the rest linearized.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .ensemble import EnsembleStats
from .errors import ConfigurationError, NumericFailure, UsageError

__all__ = [
    "DistanceMetric",
    "LocalizationKernel",
    "LocalizationScheme",
    "gaspari_cohn",
    "build_psi",
    "localize_cuu",
    "localize_cup",
    "psi_min_eig",
    "is_positive_definite",
    "write_psi_csv",
    "read_psi_csv",
]

METRIC_KINDS = ("lattice", "periodic-lattice", "log-grid", "explicit-matrix")
KERNEL_KINDS = ("gaussian", "gaspari-cohn", "hard-cutoff", "identity")
SCHEME_KINDS = ("param-param-only", "centralized", "linearized", "mixed")


@dataclass(frozen=True)
class DistanceMetric:
    """Distance between parameter indices.

    ``coordinates`` is used by ``log-grid`` (log10 of layer-centre depths) and
    ``matrix`` by ``explicit-matrix``.
    """

    kind: str = "lattice"
    period: Optional[int] = None
    coordinates: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ConfigurationError(f"unknown distance metric {self.kind!r}")
        if self.kind == "periodic-lattice" and (self.period is not None and self.period < 1):
            raise ConfigurationError("period must be a positive integer")
        if self.kind == "log-grid" and self.coordinates is None:
            raise ConfigurationError("log-grid metric needs coordinates")
        if self.kind == "explicit-matrix" and self.matrix is None:
            raise ConfigurationError("explicit-matrix metric needs a matrix")

    def distances(self, dim: int) -> np.ndarray:
        idx = np.arange(dim)
        if self.kind == "lattice":
            return np.abs(idx[:, None] - idx[None, :]).astype(float)
        if self.kind == "periodic-lattice":
            period = self.period or dim
            d = np.abs(idx[:, None] - idx[None, :]) % period
            return np.minimum(d, period - d).astype(float)
        if self.kind == "log-grid":
            c = np.asarray(self.coordinates, dtype=float)
            if c.shape != (dim,):
                raise ConfigurationError(f"expected {dim} coordinates, got {c.shape}")
            return np.abs(c[:, None] - c[None, :])
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (dim, dim):
            raise ConfigurationError(f"distance matrix must be {dim}x{dim}")
        return m


def gaspari_cohn(r):
    """Fifth-order compactly supported correlation function (support radius 2).

    Accepts scalars or arrays of non-negative scaled distances.
    """
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inner = r <= 1.0
    outer = (r > 1.0) & (r < 2.0)
    ri = r[inner]
    out[inner] = -0.25 * ri**5 + 0.5 * ri**4 + 0.625 * ri**3 - 5.0 / 3.0 * ri**2 + 1.0
    ro = r[outer]
    out[outer] = (
        ro**5 / 12.0 - 0.5 * ro**4 + 0.625 * ro**3 + 5.0 / 3.0 * ro**2
        - 5.0 * ro + 4.0 - 2.0 / (3.0 * ro)
    )
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LocalizationKernel:
    """Taper ``psi(r)`` applied to scaled distances ``r = dist / radius``.

    The Gaussian is ``exp(-r**2 / 2)``; the hard cutoff keeps ``r <= 1``.
    """

    kind: str = "gaussian"
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel {self.kind!r}")
        if not self.radius > 0:
            raise ConfigurationError("kernel radius must be positive")

    def __call__(self, distance):
        r = np.asarray(distance, dtype=float) / self.radius
        if self.kind == "gaussian":
            return np.exp(-0.5 * r**2)
        if self.kind == "gaspari-cohn":
            return gaspari_cohn(r)
        if self.kind == "hard-cutoff":
            return (r <= 1.0).astype(float)
        return (r == 0.0).astype(float)


def build_psi(metric: DistanceMetric, kernel: LocalizationKernel, dim: int) -> np.ndarray:
    """Localization matrix ``psi[i, j] = kernel(dist(i, j) / radius)``."""
    if dim < 1:
        raise ConfigurationError("dimension must be at least 1")
    psi = np.asarray(kernel(metric.distances(dim)), dtype=float)
    psi = 0.5 * (psi + psi.T)
    np.fill_diagonal(psi, 1.0)
    return psi


def localize_cuu(stats_or_cuu: Union[EnsembleStats, np.ndarray], psi) -> np.ndarray:
    """Schur product ``psi o C^uu``."""
    cuu = stats_or_cuu.cuu if isinstance(stats_or_cuu, EnsembleStats) else np.asarray(stats_or_cuu)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != cuu.shape:
        raise ConfigurationError(f"psi shape {psi.shape} does not match C^uu {cuu.shape}")
    out = cuu * psi
    return 0.5 * (out + out.T)


@dataclass
class LocalizationScheme:
    """Recipe producing localized ``C~^uu`` and ``C~^up`` from raw statistics.

    ``jacobian_provider`` maps the ensemble mean to a ``(d_y, d_u)`` matrix (for
    the mixed scheme: the rows of the linearized outputs only).
    ``provider_thread_safe`` records whether it may be called concurrently.
    """

    kind: str
    psi: np.ndarray
    center_map: Optional[np.ndarray] = None
    jacobian_provider: Optional[Callable[[np.ndarray], np.ndarray]] = None
    split_index: Optional[int] = None
    provider_thread_safe: bool = True
    cup_taper: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigurationError(f"unknown localization scheme {self.kind!r}")
        self.psi = np.asarray(self.psi, dtype=float)
        if self.psi.ndim != 2 or self.psi.shape[0] != self.psi.shape[1]:
            raise ConfigurationError("psi must be a square matrix")
        if self.center_map is not None:
            self.center_map = np.asarray(self.center_map, dtype=int)
            if np.any(self.center_map < 0) or np.any(self.center_map >= self.psi.shape[0]):
                raise ConfigurationError("center_map indices out of range")
        if self.kind in ("centralized", "mixed") and self.center_map is None:
            raise ConfigurationError(f"{self.kind} localization needs a center_map")
        if self.kind in ("linearized", "mixed") and self.jacobian_provider is None:
            raise ConfigurationError(f"{self.kind} localization needs a jacobian_provider")
        if self.kind == "mixed":
            if self.split_index is None or self.split_index < 0:
                raise ConfigurationError("mixed localization needs split_index >= 0")
            if len(self.center_map) != self.split_index:
                raise ConfigurationError("mixed scheme: center_map must cover the first split_index outputs")

    def localized_cuu(self, stats: EnsembleStats) -> np.ndarray:
        return localize_cuu(stats, self.psi)

    def is_positive_definite(self) -> bool:
        return is_positive_definite(self.psi)


def _jacobian(scheme: LocalizationScheme, stats: EnsembleStats, rows: int) -> np.ndarray:
    try:
        h = np.asarray(scheme.jacobian_provider(stats.mean_u), dtype=float)
    except NumericFailure:
        raise
    except (FloatingPointError, ArithmeticError) as exc:
        raise NumericFailure(f"jacobian provider failed: {exc}") from exc
    if h.shape != (rows, stats.cuu.shape[0]):
        raise ConfigurationError(
            f"jacobian provider returned shape {h.shape}, expected {(rows, stats.cuu.shape[0])}"
        )
    if not np.all(np.isfinite(h)):
        raise NumericFailure("jacobian provider returned non-finite entries")
    return h


def _centralized(cup: np.ndarray, scheme: LocalizationScheme, cols: slice) -> np.ndarray:
    if scheme.cup_taper is not None:
        taper = np.asarray(scheme.cup_taper)[:, cols]
    else:
        taper = scheme.psi[:, scheme.center_map]
    if taper.shape != cup.shape:
        raise ConfigurationError(f"centralized taper {taper.shape} does not match C^up {cup.shape}")
    return cup * taper


def localize_cup(stats: EnsembleStats, scheme: Optional[LocalizationScheme]) -> np.ndarray:
    """Localized cross covariance ``C~^up`` (``(d_u, d_y)``) under ``scheme``.

    ``scheme=None`` returns the raw ``C^up``.
    """
    cup = stats.cup
    if scheme is None or scheme.kind == "param-param-only":
        return cup
    d_u, d_y = cup.shape
    if scheme.psi.shape[0] != d_u:
        raise ConfigurationError("psi dimension does not match the parameter dimension")
    if scheme.kind == "centralized":
        if len(scheme.center_map) != d_y:
            raise ConfigurationError(f"center_map has {len(scheme.center_map)} entries, expected {d_y}")
        return _centralized(cup, scheme, slice(0, d_y))
    cuu_loc = localize_cuu(stats, scheme.psi)
    if scheme.kind == "linearized":
        return cuu_loc @ _jacobian(scheme, stats, d_y).T
    split = scheme.split_index
    if split > d_y:
        raise ConfigurationError("split_index exceeds the output dimension")
    out = np.empty_like(cup)
    out[:, :split] = _centralized(cup[:, :split], scheme, slice(0, split))
    out[:, split:] = cuu_loc @ _jacobian(scheme, stats, d_y - split).T
    return out


def psi_min_eig(psi) -> float:
    """Smallest eigenvalue of a symmetric localization matrix."""
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1] or not np.allclose(psi, psi.T, atol=1e-14):
        raise UsageError("psi_min_eig needs a symmetric matrix")
    return float(np.linalg.eigvalsh(0.5 * (psi + psi.T))[0])


def is_positive_definite(psi) -> bool:
    try:
        np.linalg.cholesky(np.asarray(psi, dtype=float))
    except np.linalg.LinAlgError:
        return False
    return True


def write_psi_csv(path, psi) -> None:
    """Dense row-major CSV with a header row of column indices."""
    psi = np.asarray(psi, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(range(psi.shape[1]))
        for row in psi:
            writer.writerow(repr(float(v)) for v in row)


def read_psi_csv(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise ConfigurationError(f"{path}: ragged matrix")
    return data
