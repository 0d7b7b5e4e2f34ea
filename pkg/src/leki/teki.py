"""Tikhonov-regularized inversion by problem extension.

Stacking ``C0^{-1/2} u`` on top of ``G(u)`` and zeros on top of ``y`` makes
the plain least-squares loss of the extended problem equal the Tikhonov loss
``||G(u) - y||^2 + ||u||^2_{C0^{-1}}``, so any (localized) EKI run on the
extended problem is a TEKI run.
"""
from __future__ import annotations

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import ConfigurationError
from .models.base import ForwardModel

__all__ = ["TikhonovExtension", "extend", "tikhonov_loss", "extended_loss", "inv_sqrt", "parse_c0"]


def inv_sqrt(c0) -> Tuple[np.ndarray, bool]:
    """``C0^{-1/2}`` and whether ``C0`` is diagonal.

    Raises :class:`ConfigurationError` unless ``C0`` is symmetric positive definite.
    """
    c0 = np.atleast_2d(np.asarray(c0, dtype=float))
    if c0.ndim != 2 or c0.shape[0] != c0.shape[1]:
        raise ConfigurationError("C0 must be a square matrix")
    if not np.all(np.isfinite(c0)) or not np.allclose(c0, c0.T, rtol=1e-12, atol=0.0):
        raise ConfigurationError("C0 must be finite and symmetric")
    diag = np.diag(c0)
    if np.count_nonzero(c0 - np.diag(diag)) == 0:
        if np.any(diag <= 0):
            raise ConfigurationError("C0 is not positive definite")
        return np.diag(1.0 / np.sqrt(diag)), True
    vals, vecs = np.linalg.eigh(0.5 * (c0 + c0.T))
    if vals[0] <= 0:
        raise ConfigurationError("C0 is not positive definite")
    out = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (out + out.T), False


class TikhonovExtension(ForwardModel):
    """Extended model ``u -> (C0^{-1/2} u, G(u))``.

    When ``C0`` is diagonal the regularization outputs are centralized at
    ``i(j) = j``, and the base model's centres (if any) follow.
    """

    def __init__(self, base_model: ForwardModel, y, c0):
        self.base_model = base_model
        self.c0_inv_sqrt, self.diagonal = inv_sqrt(c0)
        self.c0_inv_sqrt.setflags(write=False)
        d_u = base_model.param_dim
        if self.c0_inv_sqrt.shape != (d_u, d_u):
            raise ConfigurationError(f"C0 must be {d_u}x{d_u}")
        y = np.asarray(y, dtype=float)
        if y.shape != (base_model.output_dim,):
            raise ConfigurationError(f"y must have length {base_model.output_dim}")
        self._scale = np.diag(self.c0_inv_sqrt).copy() if self.diagonal else None
        self.param_dim = d_u
        self.output_dim = d_u + base_model.output_dim
        self.extended_y = np.concatenate([np.zeros(d_u), y])
        self.extended_y.setflags(write=False)
        base_map = getattr(base_model, "center_map", None)
        if self.diagonal and base_map is not None:
            self.center_map = np.concatenate([np.arange(d_u), np.asarray(base_map, dtype=int)])
        else:
            self.center_map = None

    def _prior_block(self, u):
        if self._scale is not None:
            return self._scale[:, None] * u if u.ndim > 1 else self._scale * u
        return self.c0_inv_sqrt @ u

    def evaluate(self, u):
        u = self._check_input(u)
        return np.concatenate([self._prior_block(u), self.base_model.evaluate(u)])

    def evaluate_ensemble(self, members):
        members = np.asarray(members, dtype=float)
        return np.vstack([self._prior_block(members), self.base_model.evaluate_ensemble(members)])

    @property
    def has_jacobian(self) -> bool:
        return self.base_model.has_jacobian

    def jacobian(self, u):
        return np.vstack([self.c0_inv_sqrt, self.base_model.jacobian(u)])


def extend(model: ForwardModel, y, c0) -> Tuple[TikhonovExtension, np.ndarray]:
    """Extended model and extended data ``(0, y)``."""
    ext = TikhonovExtension(model, y, c0)
    return ext, ext.extended_y.copy()


def tikhonov_loss(model: ForwardModel, y, c0, u) -> float:
    """``||G(u) - y||^2 + u^T C0^{-1} u`` evaluated directly."""
    u = np.asarray(u, dtype=float)
    c0 = np.atleast_2d(np.asarray(c0, dtype=float))
    r = model.evaluate(u) - np.asarray(y, dtype=float)
    return float(r @ r + u @ np.linalg.solve(c0, u))


def extended_loss(model: ForwardModel, y, c0, u) -> float:
    """``||G~(u) - y~||^2`` on the extended problem."""
    ext, y_ext = extend(model, y, c0)
    r = ext.evaluate(u) - y_ext
    return float(r @ r)


def parse_c0(spec: Union[str, float, int, list, np.ndarray], dim: int) -> np.ndarray:
    """Build ``C0`` from a config value.

    Accepts ``"identity"``, a positive scalar multiple of the identity, a
    diagonal vector, a dense matrix, or a path to a dense CSV file.
    """
    if isinstance(spec, str):
        if spec.strip().lower() == "identity":
            return np.eye(dim)
        path = Path(spec)
        if not path.is_file():
            raise ConfigurationError(f"C0 file {spec!r} not found")
        try:
            mat = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ConfigurationError(f"could not parse C0 file {spec!r}: {exc}") from exc
        spec = mat
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        if not arr > 0:
            raise ConfigurationError("C0 scale must be positive")
        return float(arr) * np.eye(dim)
    if arr.ndim == 1:
        if arr.size != dim:
            raise ConfigurationError(f"C0 diagonal must have length {dim}")
        return np.diag(arr)
    if arr.shape != (dim, dim):
        raise ConfigurationError(f"C0 must be {dim}x{dim}, got {arr.shape}")
    return arr
