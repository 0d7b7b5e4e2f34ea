"""Trial loops for the four built-in experiments and their aggregation.

Each trial draws truth, noise and the initial ensemble from its own streams
and runs every configured method ("eki" unlocalized, "leki" localized) on the
same draws.
"""
from __future__ import annotations

import functools
import hashlib
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..diagnostics import MetricsRecorder, MetricsRow
from ..dynamics import InflationConfig, RunRecord, run
from ..ensemble import Ensemble
from ..errors import ConfigurationError, NumericFailure
from ..localization import (
    DistanceMetric,
    LocalizationKernel,
    LocalizationScheme,
    build_psi,
)
from ..models import (
    DcResistivityConfig,
    DcResistivityModel,
    LinearModel,
    LocalCubicModel,
    Lorenz96Config,
    Lorenz96Model,
    WhitenedModel,
)
from ..models.lorenz96 import l96_integrate_rk4
from ..teki import extend, parse_c0
from .config import ExperimentConfig
from .data import read_sounding_csv
from .rng import stream

__all__ = [
    "TrialResult",
    "AggregateReport",
    "ExperimentResult",
    "aggregate",
    "run_experiment",
    "run_linear",
    "run_nonlinear",
    "run_lorenz96",
    "run_dc",
    "lorenz96_truths",
    "build_scheme",
    "EXIT_KINDS",
]

EXIT_KINDS = ("target-reached", "max-iterations", "failed")
PRIMARY_METRIC = {
    "linear": "misfit",
    "nonlinear": "misfit",
    "custom": "misfit",
    "lorenz96": "rmse",
    "dc-resistivity": "scaled_misfit",
}


@dataclass
class TrialResult:
    experiment: str
    dim: int
    ensemble_size: int
    method: str
    trial_id: int
    seed_used: int
    exit: str
    final: Optional[MetricsRow]
    record: Optional[RunRecord] = field(default=None, repr=False)
    input_hash: str = ""
    reason: str = ""


@dataclass(frozen=True)
class AggregateReport:
    experiment: str
    dim: int
    ensemble_size: int
    method: str
    metric: str
    trials: int
    mean: Optional[float]
    median: Optional[float]
    std: Optional[float]
    counts: Dict[str, int]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials: List[TrialResult]
    reports: List[AggregateReport]

    def report(self, dim: int, ensemble_size: int, method: str) -> AggregateReport:
        for r in self.reports:
            if (r.dim, r.ensemble_size, r.method) == (dim, ensemble_size, method):
                return r
        raise KeyError((dim, ensemble_size, method))


def aggregate(results: Sequence[TrialResult], metric: Optional[str] = None) -> List[AggregateReport]:
    """Mean/median/sample-std of the final metric per (experiment, dim, J, method).

    Failed runs are left out of the statistics but counted; with no usable
    value the statistics are ``None``.
    """
    groups: Dict[tuple, List[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.experiment, r.dim, r.ensemble_size, r.method), []).append(r)
    reports = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3])):
        rs = groups[key]
        name = metric or PRIMARY_METRIC.get(key[0], "misfit")
        vals = [getattr(r.final, name) for r in rs
                if r.exit != "failed" and r.final is not None and getattr(r.final, name) is not None]
        counts = {k: sum(r.exit == k for r in rs) for k in EXIT_KINDS}
        if vals:
            mean = float(np.mean(vals))
            median = float(statistics.median(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        else:
            mean = median = std = None
        reports.append(AggregateReport(*key, metric=name, trials=len(rs), mean=mean,
                                       median=median, std=std, counts=counts))
    return reports


def _hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return h.hexdigest()[:16]


def build_scheme(cfg: ExperimentConfig, model, dim: int, coordinates=None) -> Optional[LocalizationScheme]:
    """Localization scheme of the "leki" method for ``model``."""
    spec = cfg.localization
    if not spec.enabled:
        return None
    metric = DistanceMetric(spec.metric, period=dim if spec.metric == "periodic-lattice" else None,
                            coordinates=coordinates)
    psi = build_psi(metric, LocalizationKernel(spec.kernel, spec.radius), dim)
    kind = spec.scheme
    if kind == "param-param-only":
        return LocalizationScheme(kind, psi)
    if kind == "centralized":
        if model.center_map is None:
            raise ConfigurationError("centralized localization needs a model with centred outputs")
        return LocalizationScheme(kind, psi, center_map=model.center_map)
    if kind == "linearized":
        return LocalizationScheme(kind, psi, jacobian_provider=model.jacobian_or_fd)
    if kind == "mixed":
        split = int(cfg.model.get("split_index", 0))
        if model.center_map is None:
            raise ConfigurationError("mixed localization needs a model with centred outputs")
        return LocalizationScheme(kind, psi, center_map=model.center_map[:split], split_index=split,
                                  jacobian_provider=lambda u: model.jacobian_or_fd(u)[split:])
    raise ConfigurationError(f"unknown localization scheme {kind!r}")


@dataclass
class _Problem:
    model: object
    y: np.ndarray
    init: np.ndarray
    truth: Optional[np.ndarray]
    stds: Optional[np.ndarray] = None
    data_slice: slice = slice(None)
    project: object = None
    coordinates: Optional[np.ndarray] = None
    input_hash: str = ""


def _linear_problem(cfg, dim, J, tid, truth=None):
    truth = stream(cfg.seed, tid, "truth", dim).standard_normal(dim)
    model = LinearModel.identity(dim)
    y = model.evaluate(truth) + cfg.noise_std * stream(cfg.seed, tid, "noise", dim).standard_normal(dim)
    init = stream(cfg.seed, tid, "init", dim).standard_normal((dim, J))
    return _Problem(model, y, init, truth)


def _nonlinear_problem(cfg, dim, J, tid, truth=None):
    truth = stream(cfg.seed, tid, "truth", dim).standard_normal(dim)
    model = LocalCubicModel(dim)
    y = model.evaluate(truth) + cfg.noise_std * stream(cfg.seed, tid, "noise", dim).standard_normal(dim)
    init = stream(cfg.seed, tid, "init", dim).standard_normal((dim, J))
    return _Problem(model, y, init, truth)


def _l96_config(cfg: ExperimentConfig, dim: int) -> Lorenz96Config:
    m = cfg.model
    return Lorenz96Config(dim=dim, forcing=float(m.get("forcing", 8.0)),
                          obs_time=float(m.get("obs_time", 0.2)), inner_dt=float(m.get("inner_dt", 0.05)))


def lorenz96_truths(cfg: ExperimentConfig, dim: int) -> List[Optional[np.ndarray]]:
    """Chained attractor truths: each trial's truth is the previous one
    integrated for ``spinup_time`` more time units (RK4).

    The chain starts from ``F * ones`` plus a small perturbation (or exactly
    the fixed point with ``truth_start = "fixed-point"``). A blow-up yields
    ``None`` for that trial and restarts the chain.
    """
    m = cfg.model
    l96 = _l96_config(cfg, dim)
    spin = float(m.get("spinup_time", 1000.0))
    spin_dt = float(m.get("spinup_dt", 0.05))
    start = str(m.get("truth_start", "perturbed"))
    if start not in ("perturbed", "fixed-point"):
        raise ConfigurationError("truth_start must be 'perturbed' or 'fixed-point'")

    def fresh(tid):
        x = np.full(dim, l96.forcing)
        if start == "perturbed":
            x = x + 0.01 * stream(cfg.seed, tid, "truth", dim).standard_normal(dim)
        return x

    truths: List[Optional[np.ndarray]] = []
    x = fresh(0)
    for tid in range(cfg.trials):
        try:
            x = l96_integrate_rk4(x, spin, spin_dt, l96.forcing)
            truths.append(x.copy())
        except NumericFailure:
            truths.append(None)
            x = fresh(tid + 1)
    return truths


def _lorenz96_problem(cfg, dim, J, tid, truth=None):
    model = Lorenz96Model(_l96_config(cfg, dim))
    y = model.evaluate(truth) + cfg.noise_std * stream(cfg.seed, tid, "noise", dim).standard_normal(dim)
    c0 = parse_c0(cfg.teki if cfg.teki is not None else "identity", dim)
    ext, y_ext = extend(model, y, c0)
    init = stream(cfg.seed, tid, "init", dim).standard_normal((dim, J))
    return _Problem(ext, y_ext, init, truth, data_slice=slice(dim, None))


def _dc_setup(cfg: ExperimentConfig, dim: int):
    """Forward model, data, stds and (synthetic) truth data for the DC experiment."""
    m = cfg.model
    depth_min = float(m.get("depth_min", 0.1))
    depth_max = float(m.get("depth_max", 1e5))
    method = str(m.get("filter", "dlf"))
    spacings_cfg = m.get("half_spacings")
    if cfg.data_file is not None:
        s, y, stds = read_sounding_csv(cfg.data_file)
        if spacings_cfg is not None and len(spacings_cfg) != s.size:
            raise ConfigurationError(
                f"data file has {s.size} rows but the config lists {len(spacings_cfg)} half-spacings")
        return DcResistivityModel(DcResistivityConfig(dim, depth_min, depth_max, s, method)), y, stds, None
    s = np.asarray(spacings_cfg, dtype=float) if spacings_cfg is not None else np.logspace(0.0, 4.0, 29)
    model = DcResistivityModel(DcResistivityConfig(dim, depth_min, depth_max, s, method))
    truth_kind = str(m.get("truth", "three-layer"))
    if truth_kind == "three-layer":
        rho = np.asarray(m.get("truth_resistivities", [5.0, 50.0, 10.0]), dtype=float)
        interfaces = np.asarray(m.get("truth_interfaces", [10.0, 1000.0]), dtype=float)
        thick = np.diff(np.concatenate([[0.0], interfaces]))
        truth_model = DcResistivityModel(DcResistivityConfig(half_spacings=s, thicknesses=thick, filter=method))
        y_clean = truth_model.evaluate(rho)
    elif truth_kind == "homogeneous":
        y_clean = model.evaluate(np.full(dim, float(m.get("truth_resistivity", 10.0))))
    else:
        raise ConfigurationError(f"unknown DC truth {truth_kind!r}")
    stds = float(m.get("noise_fraction", 0.05)) * y_clean
    return model, y_clean, stds, y_clean


def _dc_problem(cfg, dim, J, tid, truth=None):
    model, y, stds, y_clean = _dc_setup(cfg, dim)
    m = cfg.model
    if y_clean is not None and bool(m.get("add_noise", True)):
        y = y_clean + stds * stream(cfg.seed, tid, "noise", dim).standard_normal(y_clean.size)
    lo, hi = float(m.get("init_low", 0.5)), float(m.get("init_high", 5.0))
    init = stream(cfg.seed, tid, "init", dim).uniform(lo, hi, size=(dim, J))
    floor = float(m.get("clamp_min", 0.1))
    coords = model.cfg.log_centers()
    if bool(m.get("whiten", True)):
        # unit noise covariance: divide model and data by the error stds
        model = WhitenedModel(model, stds)
        y = y / stds
        stds = np.ones_like(stds)
    return _Problem(model, y, init, None, stds=stds, project=functools.partial(_clamp, floor=floor),
                    coordinates=coords)


def _clamp(u, floor):
    return np.maximum(u, floor)


BUILDERS = {
    "linear": _linear_problem,
    "nonlinear": _nonlinear_problem,
    "lorenz96": _lorenz96_problem,
    "dc-resistivity": _dc_problem,
}


def _run_trial(cfg: ExperimentConfig, dim: int, J: int, tid: int, truth=None) -> List[TrialResult]:
    if cfg.experiment == "lorenz96" and truth is None:
        return [TrialResult(cfg.experiment, dim, J, meth, tid, cfg.seed, "failed", None,
                            reason="truth spin-up blew up") for meth in cfg.methods]
    prob = BUILDERS[cfg.experiment](cfg, dim, J, tid, truth)
    input_hash = _hash(prob.init, prob.y, prob.truth if prob.truth is not None else [])
    inflation = InflationConfig(cfg.inflation_sigma)
    out = []
    for meth in cfg.methods:
        scheme = None
        if meth == "leki":
            scheme = build_scheme(cfg, prob.model, dim, prob.coordinates)
        recorder = MetricsRecorder(prob.model, prob.y, truth=prob.truth, stds=prob.stds, scheme=scheme,
                                   data_slice=prob.data_slice, level=cfg.diagnostics_level)
        state, record = run(Ensemble(prob.init), prob.model, scheme, prob.y, inflation,
                            cfg.step_policy, cfg.stopping, project=prob.project, recorder=recorder,
                            stds=prob.stds, data_slice=prob.data_slice)
        out.append(TrialResult(cfg.experiment, dim, J, meth, tid, cfg.seed, record.exit, record.final,
                               record, input_hash, record.reason))
    return out


def _task(args):
    return _run_trial(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every (dim, J, trial) cell; results are sorted independent of scheduling."""
    if cfg.experiment not in BUILDERS:
        raise ConfigurationError(f"experiment {cfg.experiment!r} has no built-in trial loop")
    tasks = []
    for dim in cfg.dims:
        truths = lorenz96_truths(cfg, dim) if cfg.experiment == "lorenz96" else [None] * cfg.trials
        for J in cfg.ensemble_sizes:
            tasks.extend((cfg, dim, J, tid, truths[tid]) for tid in range(cfg.trials))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_task, tasks))
    else:
        batches = [_task(t) for t in tasks]
    order = {m: k for k, m in enumerate(cfg.methods)}
    trials = sorted((r for b in batches for r in b),
                    key=lambda r: (r.dim, r.ensemble_size, r.trial_id, order[r.method]))
    return ExperimentResult(cfg, trials, aggregate(trials))


def _require(cfg: ExperimentConfig, kind: str) -> None:
    if cfg.experiment != kind:
        raise ConfigurationError(f"expected experiment={kind!r}, got {cfg.experiment!r}")


def run_linear(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    _require(cfg, "linear")
    return run_experiment(cfg, workers)


def run_nonlinear(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    _require(cfg, "nonlinear")
    return run_experiment(cfg, workers)


def run_lorenz96(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    _require(cfg, "lorenz96")
    return run_experiment(cfg, workers)


def run_dc(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    _require(cfg, "dc-resistivity")
    return run_experiment(cfg, workers)
