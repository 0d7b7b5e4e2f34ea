"""The (localized) EKI iteration engine.

Each member follows the explicit-Euler discretization of

    du^j/dt = -C~^up (G(u^j) - y) + lambda_t xi^j,

with ``C~^up`` the (localized) cross covariance, ``lambda_t = sigma/(t+1)^2``
and ``xi^j = D^{-1}(u^j - mean u) / 2`` the whitened inflation directions.
Statistics and localization are computed once per step and shared by all
members.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .diagnostics import MetricsRecorder, MetricsRow, scaled_misfit
from .ensemble import Ensemble, EnsembleStats, compute_stats
from .errors import ConfigurationError, DomainError, NumericFailure
from .localization import LocalizationScheme, localize_cup

__all__ = [
    "InflationConfig",
    "StepPolicy",
    "StoppingRule",
    "IterationState",
    "RunRecord",
    "EXIT_CONDITIONS",
    "lambda_at",
    "inflation_vectors",
    "discrete_update",
    "euler_step",
    "prepare_state",
    "run",
]

EXIT_CONDITIONS = ("running", "target-reached", "max-iterations", "failed")
DEGENERATE_VARIANCE = 1e-14
ROUNDOFF_SPREAD = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class InflationConfig:
    """Additive inflation strength; ``schedule`` overrides ``sigma/(t+1)^2``."""

    sigma: float = 0.0
    schedule: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError("inflation sigma must be nonnegative")


def lambda_at(inflation: InflationConfig, t: float) -> float:
    if t < 0:
        raise DomainError("time must be nonnegative")
    if inflation.schedule is not None:
        return float(inflation.schedule(t))
    return inflation.sigma / (t + 1.0) ** 2


@dataclass(frozen=True)
class StepPolicy:
    """Fixed step, or a step chosen from scaled-misfit thresholds.

    ``stages`` is a list of ``(threshold, dt)`` pairs with strictly decreasing
    thresholds; the first threshold is normally ``inf``. A stage becomes
    active once the scaled misfit drops below its threshold and stays active
    afterwards.
    """

    kind: str = "fixed"
    dt: float = 0.1
    stages: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "misfit-threshold"):
            raise ConfigurationError(f"unknown step policy {self.kind!r}")
        if self.kind == "fixed":
            if not self.dt > 0:
                raise ConfigurationError("dt must be positive")
            return
        stages = tuple((float(th), float(dt)) for th, dt in self.stages)
        if not stages:
            raise ConfigurationError("misfit-threshold policy needs stages")
        if any(not dt > 0 for _, dt in stages):
            raise ConfigurationError("all stage steps must be positive")
        ths = [th for th, _ in stages]
        if any(b >= a for a, b in zip(ths, ths[1:])):
            raise ConfigurationError("stage thresholds must be strictly decreasing")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def dc_schedule(cls) -> "StepPolicy":
        return cls(kind="misfit-threshold", stages=((math.inf, 0.01), (8.0, 0.1), (6.0, 0.5)))

    @property
    def needs_misfit(self) -> bool:
        return self.kind == "misfit-threshold"

    def select(self, scaled: Optional[float], stage: int) -> Tuple[int, float]:
        """Active stage index and step given the current scaled misfit."""
        if self.kind == "fixed":
            return 0, self.dt
        if scaled is not None:
            for k in range(len(self.stages) - 1, stage, -1):
                if scaled < self.stages[k][0]:
                    stage = k
                    break
        return stage, self.stages[stage][1]


@dataclass(frozen=True)
class StoppingRule:
    max_iterations: int = 100
    target_scaled_misfit: Optional[float] = None
    fail_on_nonfinite: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if self.target_scaled_misfit is not None and not self.target_scaled_misfit > 0:
            raise ConfigurationError("target scaled misfit must be positive")


@dataclass(frozen=True)
class IterationState:
    """Ensemble, continuous time and iteration count, plus cached per-step
    quantities (model outputs, statistics, localized cross covariance)."""

    ensemble: Ensemble
    t: float = 0.0
    iter: int = 0
    exit: str = "running"
    outputs: Optional[np.ndarray] = field(default=None, repr=False)
    stats: Optional[EnsembleStats] = field(default=None, repr=False)
    localized_cup: Optional[np.ndarray] = field(default=None, repr=False)
    reason: str = ""

    def failed(self, reason: str) -> "IterationState":
        return replace(self, exit="failed", reason=reason)


@dataclass
class RunRecord:
    rows: List[MetricsRow] = field(default_factory=list)
    exit: str = "running"
    reason: str = ""
    final_ensemble: Optional[Ensemble] = None
    initial_stats: Optional[EnsembleStats] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows],
                        dtype=float)

    @property
    def final(self) -> Optional[MetricsRow]:
        return self.rows[-1] if self.rows else None


def inflation_vectors(ensemble: Ensemble, stats: EnsembleStats) -> np.ndarray:
    """``xi^j = D^{-1}(u^j - mean u) / 2`` with ``D = diag(C^uu)``.

    Components with variance at or below ``1e-14 * ||C^uu||_max`` get zero, as
    do components whose spread is only rounding noise of the member values
    (a numerically constant row whose mean is off by an ulp).
    """
    dev = ensemble.members - stats.mean_u[:, None]
    d = np.diag(stats.cuu)
    cmax = float(np.max(np.abs(stats.cuu))) if stats.cuu.size else 0.0
    magnitude = np.max(np.abs(ensemble.members), axis=1)
    ok = (d > DEGENERATE_VARIANCE * cmax) & (np.sqrt(d) > ROUNDOFF_SPREAD * magnitude)
    xi = np.zeros_like(dev)
    xi[ok] = 0.5 * dev[ok] / d[ok, None]
    return xi


def discrete_update(ensemble: Ensemble, stats: EnsembleStats, y, gamma=None) -> Ensemble:
    """``u^j + C^up (C^pp + Gamma)^{-1} (y - G(u^j))`` with ``Gamma = I`` by default."""
    y = np.asarray(y, dtype=float)
    cpp = stats.cpp
    gamma = np.eye(cpp.shape[0]) if gamma is None else np.atleast_2d(np.asarray(gamma, dtype=float))
    innov = y[:, None] - stats.outputs
    try:
        w = linalg.solve(cpp + gamma, innov, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"gain solve failed: {exc}") from exc
    return Ensemble(ensemble.members + stats.cup @ w)


def prepare_state(state: IterationState, model, scheme: Optional[LocalizationScheme] = None,
                  *, with_cup: bool = True) -> IterationState:
    """Fill in outputs, statistics and (optionally) the localized cross covariance.

    Non-finite parameters or outputs turn the state into a failed one.
    """
    if state.exit == "failed":
        return state
    if not state.ensemble.all_finite():
        return state.failed("non-finite parameters")
    outputs = state.outputs
    if outputs is None:
        with np.errstate(all="ignore"):
            outputs = np.asarray(model.evaluate_ensemble(state.ensemble.members), dtype=float)
    if not np.all(np.isfinite(outputs)):
        return state.failed("non-finite model output")
    stats = state.stats if state.stats is not None else compute_stats(state.ensemble, outputs)
    cup = state.localized_cup
    if with_cup and cup is None:
        try:
            cup = localize_cup(stats, scheme)
        except NumericFailure as exc:
            return state.failed(str(exc))
    return replace(state, outputs=outputs, stats=stats, localized_cup=cup)


def euler_step(state: IterationState, model, scheme: Optional[LocalizationScheme], y,
               inflation: InflationConfig, dt: float, *, fail_on_nonfinite: bool = True) -> IterationState:
    """One explicit-Euler step of the localized EKI flow.

    The returned state carries no cached outputs; use :func:`prepare_state`
    (after any parameter projection) before the next step.
    """
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    y = np.asarray(y, dtype=float)
    if y.shape != (model.output_dim,):
        raise ConfigurationError(f"y must have length {model.output_dim}")
    state = prepare_state(state, model, scheme)
    if state.exit == "failed":
        if fail_on_nonfinite:
            return state
        raise NumericFailure(state.reason)
    drift = -state.localized_cup @ (state.outputs - y[:, None])
    lam = lambda_at(inflation, state.t)
    if lam > 0:
        drift = drift + lam * inflation_vectors(state.ensemble, state.stats)
    with np.errstate(all="ignore"):
        new = state.ensemble.members + dt * drift
    nxt = IterationState(Ensemble(new), t=state.t + dt, iter=state.iter + 1)
    if not nxt.ensemble.all_finite():
        if not fail_on_nonfinite:
            raise NumericFailure("non-finite parameters after step")
        return nxt.failed("non-finite parameters after step")
    return nxt


def run(initial: Ensemble, model, scheme: Optional[LocalizationScheme], y,
        inflation: InflationConfig = InflationConfig(), policy: StepPolicy = StepPolicy(),
        stop: StoppingRule = StoppingRule(), *,
        project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        recorder: Optional[Callable[[IterationState], MetricsRow]] = None,
        stds=None, data_slice: slice = slice(None), record_initial: bool = False,
        callback: Optional[Callable[[IterationState], None]] = None,
        ) -> Tuple[IterationState, RunRecord]:
    """Iterate :func:`euler_step` until a stopping condition holds.

    Parameters
    ----------
    project : callable, optional
        Applied to the ``(d_u, J)`` members after every step (e.g. a clamp).
    recorder : callable, optional
        Maps the prepared state to a row; defaults to a basic
        :class:`~leki.diagnostics.MetricsRecorder`.
    stds : array_like, optional
        Data standard deviations for the scaled misfit that drives the step
        policy and the target; ones if omitted.
    data_slice : slice
        Outputs compared with data in the scaled misfit.
    callback : callable, optional
        Called with every prepared state (including the initial one).

    Failures (non-finite values, failing Jacobian providers) end the run with
    ``exit == "failed"``; they are not raised.
    """
    y = np.asarray(y, dtype=float)
    y_data = y[data_slice]
    if recorder is None:
        recorder = MetricsRecorder(model, y, scheme=scheme, data_slice=data_slice, stds=stds)
    stds = np.ones_like(y_data) if stds is None else np.asarray(stds, dtype=float)
    record = RunRecord()

    def current_scaled(st: IterationState) -> float:
        return scaled_misfit(y_data, st.stats.mean_g[data_slice], stds)

    def finish(st: IterationState, exit: str) -> Tuple[IterationState, RunRecord]:
        st = replace(st, exit=exit)
        record.exit = exit
        record.reason = st.reason
        record.final_ensemble = st.ensemble
        return st, record

    state = prepare_state(IterationState(initial), model, scheme)
    if state.exit == "failed":
        return finish(state, "failed")
    record.initial_stats = state.stats
    if callback is not None:
        callback(state)
    if record_initial:
        record.rows.append(recorder(state))
    stage = 0
    while True:
        scaled = current_scaled(state) if policy.needs_misfit else None
        stage, dt = policy.select(scaled, stage)
        try:
            nxt = euler_step(state, model, scheme, y, inflation, dt)
            if nxt.exit != "failed" and project is not None:
                with np.errstate(all="ignore"):
                    nxt = replace(nxt, ensemble=Ensemble(project(nxt.ensemble.members)))
            nxt = prepare_state(nxt, model, scheme)
            if nxt.exit != "failed":
                record.rows.append(recorder(nxt))
        except NumericFailure as exc:
            nxt = IterationState(state.ensemble, state.t + dt, state.iter + 1).failed(str(exc))
        if nxt.exit == "failed":
            if not stop.fail_on_nonfinite:
                raise NumericFailure(nxt.reason)
            return finish(nxt, "failed")
        state = nxt
        if callback is not None:
            callback(state)
        target = stop.target_scaled_misfit
        if target is not None and (math.isinf(target) or current_scaled(state) < target):
            return finish(state, "target-reached")
        if state.iter >= stop.max_iterations:
            return finish(state, "max-iterations")
