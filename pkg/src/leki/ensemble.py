"""Ensemble storage, sample statistics and matrix norms.

Ensembles are stored column-wise: ``members[:, j]`` is the j-th candidate
parameter vector, so an ensemble of ``J`` members in ``d_u`` dimensions is a
``(d_u, J)`` array. Model outputs follow the same convention, ``(d_y, J)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, NumericFailure, UsageError

__all__ = [
    "Ensemble",
    "EnsembleStats",
    "MatrixNormReport",
    "compute_stats",
    "norms",
    "spectral_norm",
    "subspace_residual",
    "numerical_rank",
]


@dataclass(frozen=True)
class Ensemble:
    """A ``(d_u, J)`` matrix of candidate solutions.

    Construction checks the shape only. Non-finite entries are allowed so that a
    diverged run can still be represented; use :meth:`all_finite` to detect them.
    """

    members: np.ndarray

    def __post_init__(self):
        members = np.array(self.members, dtype=float)
        if members.ndim != 2:
            raise ConfigurationError(
                f"ensemble must be a 2-D (d_u, J) array, got shape {members.shape}"
            )
        if members.shape[1] < 2:
            raise ConfigurationError("an ensemble needs at least two members")
        members.setflags(write=False)
        object.__setattr__(self, "members", members)

    @property
    def param_dim(self) -> int:
        return self.members.shape[0]

    @property
    def size(self) -> int:
        return self.members.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.members.mean(axis=1)

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.members)))


@dataclass(frozen=True)
class EnsembleStats:
    """Sufficient statistics of one iteration."""

    mean_u: np.ndarray
    mean_g: np.ndarray
    cuu: np.ndarray
    cup: np.ndarray
    cpp: np.ndarray
    outputs: np.ndarray
    deviations_u: np.ndarray
    deviations_g: np.ndarray

    @property
    def size(self) -> int:
        return self.outputs.shape[1]


@dataclass(frozen=True)
class MatrixNormReport:
    max_norm: float
    one_norm: float
    op_norm: float
    min_eig: Optional[float] = None


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def compute_stats(ensemble: Ensemble, outputs) -> EnsembleStats:
    """Sample means and (cross) covariances with the ``1/(J-1)`` normalisation.

    Parameters
    ----------
    ensemble : Ensemble
        Current ensemble, ``(d_u, J)``.
    outputs : array_like
        Model predictions ``G(u^j)`` stacked column-wise, ``(d_y, J)``.

    Raises
    ------
    ConfigurationError
        If ``outputs`` does not have ``J`` columns.
    NumericFailure
        If any member or prediction is NaN or infinite.
    """
    u = ensemble.members
    g = np.asarray(outputs, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if g.ndim != 2 or g.shape[1] != u.shape[1]:
        raise ConfigurationError(
            f"outputs must have shape (d_y, {u.shape[1]}), got {g.shape}"
        )
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g))):
        raise NumericFailure("non-finite entries in ensemble or model outputs")

    n = u.shape[1] - 1
    mean_u = u.mean(axis=1)
    mean_g = g.mean(axis=1)
    du = u - mean_u[:, None]
    dg = g - mean_g[:, None]
    cuu = _symmetrize(du @ du.T / n)
    cup = du @ dg.T / n
    cpp = _symmetrize(dg @ dg.T / n)
    return EnsembleStats(
        mean_u=mean_u,
        mean_g=mean_g,
        cuu=cuu,
        cup=cup,
        cpp=cpp,
        outputs=g,
        deviations_u=du,
        deviations_g=dg,
    )


def spectral_norm(a, *, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Largest singular value.

    Symmetric input goes through ``eigvalsh``; anything else uses power
    iteration on ``A^T A`` started from the column of largest norm, so the
    returned value never drops below the largest column norm of ``A``.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    if a.shape[0] == a.shape[1] and np.array_equal(a, a.T):
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))

    col_norms = np.linalg.norm(a, axis=0)
    lower = float(col_norms.max())
    if lower == 0.0:
        return 0.0
    # small deterministic tilt so the start is not orthogonal to the top vector
    v = np.full(a.shape[1], 1e-3 / np.sqrt(a.shape[1]))
    v[int(np.argmax(col_norms))] += 1.0
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        new = float(np.sqrt(nw))
        v = w / nw
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    # Rayleigh quotient of the final iterate
    est = max(est, float(np.linalg.norm(a @ v)))
    return max(est, lower)


def norms(matrix, *, with_min_eig: bool = False) -> MatrixNormReport:
    """Max-entry, max-row-sum and operator norms of a matrix.

    ``min_eig`` is only filled in when ``with_min_eig`` is set; it then requires
    a symmetric input and raises :class:`UsageError` otherwise.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ConfigurationError("norms() expects a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise NumericFailure("non-finite matrix entries")
    max_norm = float(np.max(np.abs(a))) if a.size else 0.0
    one_norm = float(np.max(np.sum(np.abs(a), axis=1))) if a.size else 0.0
    op_norm = spectral_norm(a)
    min_eig = None
    if with_min_eig:
        if a.shape[0] != a.shape[1] or not np.allclose(a, a.T, rtol=1e-12, atol=1e-14):
            raise UsageError("min_eig requested for a non-symmetric matrix")
        min_eig = float(np.linalg.eigvalsh(_symmetrize(a))[0])
    return MatrixNormReport(max_norm, one_norm, op_norm, min_eig)


def numerical_rank(a, rtol: float = 1e-10) -> int:
    """Number of singular values above ``rtol`` times the largest one."""
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def subspace_residual(ensemble: Ensemble, basis: Ensemble) -> float:
    """Largest relative distance of a member from the span of ``basis``.

    A zero member lies in every span and contributes 0.
    """
    u = ensemble.members
    b = basis.members
    if u.shape[0] != b.shape[0]:
        raise ConfigurationError("ensemble and basis must share the parameter dimension")
    q, s, _ = np.linalg.svd(b, full_matrices=False)
    if s.size and s[0] > 0:
        q = q[:, s > max(b.shape) * np.finfo(float).eps * s[0]]
    else:
        q = q[:, :0]
    resid = u - q @ (q.T @ u)
    member_norms = np.linalg.norm(u, axis=0)
    resid_norms = np.linalg.norm(resid, axis=0)
    ratios = np.divide(
        resid_norms, member_norms, out=np.zeros_like(resid_norms), where=member_norms > 0
    )
    return float(ratios.max())
