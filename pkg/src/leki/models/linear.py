"""Linear forward model ``G(u) = H u``."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .base import ForwardModel

__all__ = ["LinearModel", "linear_eval"]


def linear_eval(H, u) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    u = np.asarray(u, dtype=float)
    if H.shape[1] != u.shape[0]:
        raise ConfigurationError(f"H has {H.shape[1]} columns but u has length {u.shape[0]}")
    return H @ u


class LinearModel(ForwardModel):
    """``G(u) = H u`` with exact Jacobian ``H``.

    ``LinearModel.identity(d)`` is the identity map; it is centralized with
    ``i(j) = j``.
    """

    def __init__(self, H):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        self.H = H
        self.output_dim, self.param_dim = H.shape
        self._identity = H.shape[0] == H.shape[1] and np.array_equal(H, np.eye(H.shape[0]))
        self.center_map = np.arange(self.param_dim) if self._identity else None

    @classmethod
    def identity(cls, dim: int) -> "LinearModel":
        return cls(np.eye(dim))

    def evaluate(self, u):
        u = self._check_input(u)
        return u.copy() if self._identity else self.H @ u

    def evaluate_ensemble(self, members):
        members = np.asarray(members, dtype=float)
        return members.copy() if self._identity else self.H @ members

    def jacobian(self, u):
        return self.H.copy()
