"""Forward-model contract and a central finite-difference Jacobian."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..errors import ConfigurationError, NumericFailure

__all__ = ["ForwardModel", "FunctionModel", "WhitenedModel", "finite_difference_jacobian"]


class ForwardModel:
    """Map from parameters ``u`` (length ``param_dim``) to outputs (``output_dim``).

    Subclasses implement :meth:`evaluate` and may override
    :meth:`evaluate_ensemble` with a vectorised version and :meth:`jacobian`
    with an analytic derivative. ``center_map`` (one parameter index per
    output) describes centralized observations when the model has them.
    """

    param_dim: int
    output_dim: int
    center_map: Optional[np.ndarray] = None

    def evaluate(self, u) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, u) -> np.ndarray:
        return self.evaluate(u)

    def evaluate_ensemble(self, members) -> np.ndarray:
        """Evaluate every column of a ``(d_u, J)`` array; returns ``(d_y, J)``."""
        members = np.asarray(members, dtype=float)
        out = np.empty((self.output_dim, members.shape[1]))
        for j in range(members.shape[1]):
            out[:, j] = self.evaluate(members[:, j])
        return out

    @property
    def has_jacobian(self) -> bool:
        return type(self).jacobian is not ForwardModel.jacobian

    def jacobian(self, u) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no analytic Jacobian")

    def jacobian_or_fd(self, u) -> np.ndarray:
        """Analytic Jacobian if available, else central differences with
        ``h = max(1e-6, 1e-6 * ||u||_inf)``."""
        if self.has_jacobian:
            return self.jacobian(u)
        u = np.asarray(u, dtype=float)
        h = max(1e-6, 1e-6 * float(np.max(np.abs(u)))) if u.size else 1e-6
        return finite_difference_jacobian(self, u, h)

    def _check_input(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.param_dim,):
            raise ConfigurationError(
                f"{type(self).__name__} expects a vector of length {self.param_dim}, got {u.shape}"
            )
        return u


class FunctionModel(ForwardModel):
    """Wrap a plain callable (and optionally its Jacobian) as a forward model."""

    def __init__(self, func, param_dim: int, output_dim: int, jac=None, center_map=None):
        self._func = func
        self._jac = jac
        self.param_dim = int(param_dim)
        self.output_dim = int(output_dim)
        self.center_map = None if center_map is None else np.asarray(center_map, dtype=int)

    def evaluate(self, u):
        return np.atleast_1d(np.asarray(self._func(self._check_input(u)), dtype=float))

    @property
    def has_jacobian(self) -> bool:
        return self._jac is not None

    def jacobian(self, u):
        if self._jac is None:
            raise NotImplementedError("no Jacobian supplied")
        return np.atleast_2d(np.asarray(self._jac(self._check_input(u)), dtype=float))


def finite_difference_jacobian(model, u, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian ``(d_y, d_u)`` of ``model`` at ``u``.

    ``model`` is a :class:`ForwardModel` or any callable returning a vector.
    """
    if not h > 0:
        raise ConfigurationError("finite-difference step must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    f = model.evaluate if isinstance(model, ForwardModel) else model
    # all 2 d_u perturbed points in one ensemble evaluation when possible
    pert = np.concatenate([u[:, None] + h * np.eye(u.size), u[:, None] - h * np.eye(u.size)], axis=1)
    if isinstance(model, ForwardModel):
        vals = model.evaluate_ensemble(pert)
    else:
        vals = np.column_stack([np.atleast_1d(np.asarray(f(pert[:, k]), dtype=float))
                                for k in range(pert.shape[1])])
    if not np.all(np.isfinite(vals)):
        raise NumericFailure("non-finite model output during finite differencing")
    n = u.size
    return (vals[:, :n] - vals[:, n:]) / (2.0 * h)


class WhitenedModel(ForwardModel):
    """``G(u) / s`` for positive per-output scales ``s``.

    Dividing model and data by their error standard deviations turns
    ``y = G(u) + eta`` with ``eta ~ N(0, diag(s^2))`` into a problem with unit
    noise covariance.
    """

    def __init__(self, base_model: ForwardModel, scales):
        scales = np.asarray(scales, dtype=float)
        if scales.shape != (base_model.output_dim,) or np.any(scales <= 0):
            raise ConfigurationError("scales must be positive, one per output")
        self.base_model = base_model
        self.scales = scales
        self.param_dim = base_model.param_dim
        self.output_dim = base_model.output_dim
        self.center_map = base_model.center_map

    def evaluate(self, u):
        return self.base_model.evaluate(u) / self.scales

    def evaluate_ensemble(self, members):
        return self.base_model.evaluate_ensemble(members) / self.scales[:, None]

    @property
    def has_jacobian(self) -> bool:
        return self.base_model.has_jacobian

    def jacobian(self, u):
        return self.base_model.jacobian(u) / self.scales[:, None]
