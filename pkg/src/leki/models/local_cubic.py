"""Local-average cubic model.

Each output is ``y_i = u_i - sqrt(3) * a_i**2 + a_i**3`` where ``a_i`` sums
the eleven neighbours ``u_{i-5} .. u_{i+5}`` (indices outside the domain are
dropped) and divides by ten.
"""
from __future__ import annotations

import numpy as np

from .base import ForwardModel

__all__ = ["LocalCubicModel", "local_average", "local_cubic_eval"]

HALF_WIDTH = 5
DIVISOR = 10.0
SQRT3 = np.sqrt(3.0)


def local_average(u) -> np.ndarray:
    """Windowed sum over ``|i - k| <= 5`` divided by 10, along axis 0.

    Shifted adds rather than a running sum so that a change in ``u_k`` leaves
    outputs outside the window bit-identical.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    total = np.zeros_like(u)
    for s in range(-HALF_WIDTH, HALF_WIDTH + 1):
        if abs(s) >= n:
            continue
        if s >= 0:
            total[s:] += u[: n - s]
        else:
            total[: n + s] += u[-s:]
    return total / DIVISOR


def local_cubic_eval(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    a = local_average(u)
    return u - SQRT3 * a**2 + a**3


class LocalCubicModel(ForwardModel):
    """Local-average cubic model on ``dim`` components, centred at ``i(j) = j``."""

    def __init__(self, dim: int):
        self.param_dim = self.output_dim = int(dim)
        self.center_map = np.arange(self.param_dim)

    def evaluate(self, u):
        return local_cubic_eval(self._check_input(u))

    def evaluate_ensemble(self, members):
        return local_cubic_eval(members)

    def footprint(self, j: int) -> range:
        return range(max(0, j - HALF_WIDTH), min(self.param_dim, j + HALF_WIDTH + 1))

    def jacobian(self, u):
        u = self._check_input(u)
        a = local_average(u)
        idx = np.arange(self.param_dim)
        band = (np.abs(idx[:, None] - idx[None, :]) <= HALF_WIDTH) / DIVISOR
        return np.eye(self.param_dim) + (-2.0 * SQRT3 * a + 3.0 * a**2)[:, None] * band
