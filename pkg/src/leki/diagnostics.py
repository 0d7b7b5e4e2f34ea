"""Run metrics and theory instrumentation.

Output-space metrics (misfit, max error, scaled misfit), parameter-space RMSE,
covariance collapse measures, the error matrix
``R = grad G C~^up - grad G C~^uu grad G^T``, ratio estimates of the
observability and regularity constants, the Riccati comparison solution, the
Markov-chain ``v`` vector and log-log collapse rates.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .ensemble import EnsembleStats, norms
from .errors import ConfigurationError, DomainError, NumericFailure, UsageError
from .localization import LocalizationScheme, localize_cup, localize_cuu

__all__ = [
    "MetricsRow",
    "RiccatiParams",
    "MetricsRecorder",
    "misfit",
    "max_error",
    "rmse",
    "scaled_misfit",
    "error_matrix_R",
    "obs_ratio",
    "reg_ratio",
    "riccati_solution",
    "riccati_rhs",
    "v_vector",
    "v_vector_claims",
    "collapse_rate",
]

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class MetricsRow:
    """One per-iteration record; ``None`` marks a disabled diagnostic."""

    iter: int
    t: float
    misfit: float
    max_error: float
    rmse: Optional[float]
    scaled_misfit: Optional[float]
    trace_cuu: float
    max_diag: float
    min_diag: float
    r_opnorm: Optional[float] = None
    r_onenorm: Optional[float] = None
    obs_ratio: Optional[float] = None
    reg_ratio: Optional[float] = None

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RiccatiParams:
    a: float
    b: float = 0.0
    sigma: float = 0.0
    y0: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("Riccati parameter a must be positive")
        if self.b < 0 or self.sigma < 0:
            raise DomainError("b and sigma must be nonnegative")
        if self.y0 < 0:
            raise DomainError("y0 must be nonnegative")


def _pair(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ConfigurationError(f"shape mismatch {y.shape} vs {yhat.shape}")
    return y, yhat


def misfit(y, yhat) -> float:
    """Root mean square of ``y - yhat``."""
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def max_error(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.max(np.abs(y - yhat)))


def rmse(truth, mean) -> float:
    """Root mean square parameter error."""
    return misfit(truth, mean)


def scaled_misfit(y, yhat, stds) -> float:
    """Root mean square of ``(y - yhat) / stds``."""
    y, yhat = _pair(y, yhat)
    stds = np.asarray(stds, dtype=float)
    if stds.shape != y.shape:
        raise ConfigurationError("stds must match the data shape")
    if np.any(stds <= 0):
        raise ConfigurationError("standard deviations must be positive")
    return float(np.sqrt(np.mean(((y - yhat) / stds) ** 2)))


def error_matrix_R(stats: EnsembleStats, scheme: Optional[LocalizationScheme], jacobian,
                   localized_cup=None) -> np.ndarray:
    """``R = grad G C~^up - grad G C~^uu grad G^T`` (``d_y x d_y``).

    Without a scheme both covariances are the raw ensemble estimates.
    """
    jac = np.atleast_2d(np.asarray(jacobian, dtype=float))
    if jac.shape != (stats.cup.shape[1], stats.cuu.shape[0]):
        raise ConfigurationError(f"jacobian must be {(stats.cup.shape[1], stats.cuu.shape[0])}")
    cuu = stats.cuu if scheme is None else localize_cuu(stats, scheme.psi)
    cup = localized_cup if localized_cup is not None else localize_cup(stats, scheme)
    return jac @ cup - jac @ cuu @ jac.T


def obs_ratio(stats: EnsembleStats, localized_cup) -> float:
    """``[C~^up C^pu]_{i,i} / (C^uu_{i,i})^2`` at the largest diagonal entry.

    Returns 0 when the denominator is degenerate.
    """
    diag = np.diag(stats.cuu)
    i = int(np.argmax(diag))
    num = float(np.dot(np.asarray(localized_cup)[i], stats.cup[i]))
    den = float(diag[i]) ** 2
    if den <= DEGENERATE_TOL * (1.0 + abs(num)):
        return 0.0
    return num / den


def reg_ratio(stats: EnsembleStats, localized_cup) -> float:
    """``max_i sum_j C~^up_ij C^up_ij / (C^uu_ii ||C^uu||_max)``; 0 if degenerate."""
    nums = np.sum(np.asarray(localized_cup) * stats.cup, axis=1)
    diag = np.diag(stats.cuu)
    cmax = float(np.max(np.abs(stats.cuu))) if stats.cuu.size else 0.0
    dens = diag * cmax
    ok = dens > DEGENERATE_TOL * (1.0 + np.abs(nums))
    if not np.any(ok):
        return 0.0
    return float(np.max(nums[ok] / dens[ok]))


def _riccati_roots(p: RiccatiParams):
    # c^2 + (1 - b) c - a sigma = 0
    q = 1.0 - p.b
    disc = np.sqrt(q * q + 4.0 * p.a * p.sigma)
    return (-q - disc) / 2.0, (-q + disc) / 2.0


def riccati_rhs(p: RiccatiParams, t, y):
    """``-a y^2 - b y / (t+1) + sigma / (t+1)^2``."""
    return -p.a * y**2 - p.b * y / (t + 1.0) + p.sigma / (t + 1.0) ** 2


def riccati_solution(p: RiccatiParams, t):
    """Closed-form solution of ``y' = -a y^2 - b y/(t+1) + sigma/(t+1)^2``, ``y(0) = y0``.

    With roots ``c_- <= c_+`` of ``c^2 + c - b c = a sigma`` and
    ``B = -(c_- + a y0) / (c_+ + a y0)``,

        y_t = (c_- + B c_+ s) / (-a (t+1) (1 + B s)),  s = (t+1)^(c_- - c_+).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    cm, cp = _riccati_roots(p)
    ay0 = p.a * p.y0
    if cp + ay0 == 0.0:
        # y0 = 0 and sigma = 0 (b <= 1): the zero solution
        out = np.zeros_like(t)
    else:
        B = -(cm + ay0) / (cp + ay0)
        s = (t + 1.0) ** (cm - cp)
        out = (cm + B * cp * s) / (-p.a * (t + 1.0) * (1.0 + B * s))
    return float(out) if out.ndim == 0 else out


def v_vector(phi, phi0: float, i: int) -> np.ndarray:
    """Solve ``(phi0 + sum_{l!=j} phi_jl) v_j - sum_{l!=j} phi_jl v_l = phi0 [j == i]``.

    ``v_j`` is the probability that a chain which moves from ``j`` to ``l``
    with probability ``phi_jl`` and is absorbed with probability ``phi0`` is
    absorbed at ``j`` after starting at ``i``.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    d = phi.shape[0]
    if phi.shape != (d, d) or not np.allclose(phi, phi.T):
        raise DomainError("phi must be a symmetric square matrix")
    if np.any(phi < 0) or np.any(np.diag(phi) != 0):
        raise DomainError("phi must be nonnegative with zero diagonal")
    if not 0 < phi0 <= 1:
        raise DomainError("phi0 must lie in (0, 1]")
    if phi0 > 1.0 - np.max(phi.sum(axis=1)) + 1e-15:
        raise DomainError("phi0 exceeds 1 - max row sum of phi")
    if not 0 <= i < d:
        raise DomainError("index out of range")
    A = np.diag(phi0 + phi.sum(axis=1)) - phi
    rhs = np.zeros(d)
    rhs[i] = phi0
    try:
        v = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("singular v-vector system") from exc
    return v


def v_vector_claims(phi, phi0: float, i: int, v, tol: float = 1e-10) -> dict:
    """Check ``v >= 0``, ``v_i >= phi0``, ``sum_{l!=j} phi_jl v_l <= v_j`` and ``sum v <= 1``."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    v = np.asarray(v, dtype=float)
    return {
        "nonnegative": bool(np.all(v >= -tol)),
        "self_mass": bool(v[i] >= phi0 - tol),
        "superharmonic": bool(np.all(phi @ v <= v + tol)),
        "sub_probability": bool(v.sum() <= 1.0 + tol),
    }


def collapse_rate(times, values, window) -> float:
    """OLS slope of ``log(value)`` against ``log(1 + t)`` inside ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (t >= lo) & (t <= hi) & (v > 0) & np.isfinite(v)
    if np.count_nonzero(sel) < 5:
        raise UsageError("collapse_rate needs at least 5 positive points in the window")
    slope, _ = np.polyfit(np.log1p(t[sel]), np.log(v[sel]), 1)
    return float(slope)


class MetricsRecorder:
    """Turns an iteration state into a :class:`MetricsRow`.

    Parameters
    ----------
    model : ForwardModel
        The model being inverted (the extended one for TEKI runs).
    y : array_like
        Data the run targets.
    truth : array_like, optional
        Parameter truth for RMSE.
    stds : array_like, optional
        Data standard deviations for the scaled misfit.
    data_slice : slice, optional
        Outputs that count as data (TEKI: skip the regularization block).
    misfit_at : {"mean-parameter", "mean-prediction"}
        Residuals use ``G(mean u)`` (one extra evaluation) or the mean of ``G(u^j)``.
    level : {"basic", "full"}
        ``full`` adds ``R`` norms and the ratio estimates.
    """

    def __init__(self, model, y, *, truth=None, stds=None, scheme=None, data_slice=slice(None),
                 misfit_at: str = "mean-parameter", level: str = "basic"):
        if misfit_at not in ("mean-parameter", "mean-prediction"):
            raise ConfigurationError(f"unknown misfit_at {misfit_at!r}")
        if level not in ("basic", "full"):
            raise ConfigurationError(f"unknown diagnostics level {level!r}")
        self.model = model
        self.y = np.asarray(y, dtype=float)
        self.truth = None if truth is None else np.asarray(truth, dtype=float)
        self.stds = None if stds is None else np.asarray(stds, dtype=float)
        self.scheme = scheme
        self.data_slice = data_slice
        self.misfit_at = misfit_at
        self.level = level

    def __call__(self, state) -> MetricsRow:
        stats = state.stats
        ds = self.data_slice
        if self.misfit_at == "mean-parameter":
            pred = np.asarray(self.model.evaluate(stats.mean_u), dtype=float)
        else:
            pred = stats.mean_g
        y = self.y[ds]
        diag = np.diag(stats.cuu)
        row = dict(
            iter=state.iter,
            t=state.t,
            misfit=misfit(y, pred[ds]),
            max_error=max_error(y, pred[ds]),
            rmse=None if self.truth is None else rmse(self.truth, stats.mean_u),
            scaled_misfit=None if self.stds is None else scaled_misfit(y, stats.mean_g[ds], self.stds),
            trace_cuu=float(diag.sum()),
            max_diag=float(diag.max()),
            min_diag=float(diag.min()),
        )
        if self.level == "full":
            cup_loc = state.localized_cup if state.localized_cup is not None else localize_cup(stats, self.scheme)
            jac = self.model.jacobian_or_fd(stats.mean_u)
            R = error_matrix_R(stats, self.scheme, jac, localized_cup=cup_loc)
            rep = norms(R)
            row.update(r_opnorm=rep.op_norm, r_onenorm=rep.one_norm,
                       obs_ratio=obs_ratio(stats, cup_loc), reg_ratio=reg_ratio(stats, cup_loc))
        return MetricsRow(**row)
