"""Lorenz-96 initial-condition recovery.

The forward map integrates the periodic Lorenz-96 system with explicit Euler
from the unknown initial condition and observes the full state at
``obs_time``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigurationError, NumericFailure
from .base import ForwardModel

__all__ = ["Lorenz96Config", "Lorenz96Model", "l96_rhs", "l96_forward", "l96_integrate_rk4"]


@dataclass(frozen=True)
class Lorenz96Config:
    dim: int = 40
    forcing: float = 8.0
    obs_time: float = 0.2
    inner_dt: float = 0.05

    def __post_init__(self):
        if self.dim < 4:
            raise ConfigurationError("Lorenz-96 needs at least 4 components")
        if self.obs_time < 0 or not self.inner_dt > 0:
            raise ConfigurationError("obs_time must be >= 0 and inner_dt > 0")
        ratio = self.obs_time / self.inner_dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError("inner_dt must divide obs_time")

    @property
    def n_steps(self) -> int:
        return int(round(self.obs_time / self.inner_dt))


def l96_rhs(x, forcing: float = 8.0) -> np.ndarray:
    """``dx_k/dt = -x_k - x_{k-1} (x_{k-2} - x_{k+1}) + F`` with periodic indices.

    Works along axis 0, so a ``(d, J)`` array advances ``J`` states at once.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 4:
        raise ConfigurationError("Lorenz-96 needs at least 4 components")
    im1, im2, ip1 = _neighbours(x.shape[0])
    return -x - x[im1] * (x[im2] - x[ip1]) + forcing


@lru_cache(maxsize=64)
def _neighbours(d: int):
    k = np.arange(d)
    return (k - 1) % d, (k - 2) % d, (k + 1) % d


def _rhs_jacobian(x, forcing: float) -> np.ndarray:
    d = x.shape[0]
    k = np.arange(d)
    jac = -np.eye(d)
    jac[k, (k - 1) % d] += -(x[(k - 2) % d] - x[(k + 1) % d])
    jac[k, (k - 2) % d] += -x[(k - 1) % d]
    jac[k, (k + 1) % d] += x[(k - 1) % d]
    return jac


def l96_forward(u, cfg: Lorenz96Config) -> np.ndarray:
    """Explicit Euler from ``u`` for ``obs_time / inner_dt`` steps."""
    x = np.array(u, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.n_steps):
            x = x + cfg.inner_dt * l96_rhs(x, cfg.forcing)
    if not np.all(np.isfinite(x)):
        raise NumericFailure("Lorenz-96 state became non-finite")
    return x


def l96_integrate_rk4(x0, duration: float, dt: float = 0.01, forcing: float = 8.0) -> np.ndarray:
    """Classical RK4 integration, used to spin truths up onto the attractor."""
    x = np.array(x0, dtype=float)
    n = int(round(duration / dt))
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            k1 = l96_rhs(x, forcing)
            k2 = l96_rhs(x + 0.5 * dt * k1, forcing)
            k3 = l96_rhs(x + 0.5 * dt * k2, forcing)
            k4 = l96_rhs(x + dt * k3, forcing)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise NumericFailure("Lorenz-96 spin-up blew up")
    return x


class Lorenz96Model(ForwardModel):
    """Maps an initial condition to the Euler-integrated state at ``obs_time``."""

    def __init__(self, cfg: Lorenz96Config = Lorenz96Config()):
        self.cfg = cfg
        self.param_dim = self.output_dim = cfg.dim
        self.center_map = np.arange(cfg.dim)

    def evaluate(self, u):
        return l96_forward(self._check_input(u), self.cfg)

    def evaluate_ensemble(self, members):
        # non-finite columns are reported to the caller rather than raised here
        x = np.array(members, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.cfg.n_steps):
                x = x + self.cfg.inner_dt * l96_rhs(x, self.cfg.forcing)
        return x

    def jacobian(self, u):
        """Product of the Euler step Jacobians ``I + dt * Df(x_n)``."""
        x = self._check_input(u).copy()
        jac = np.eye(self.param_dim)
        dt = self.cfg.inner_dt
        for _ in range(self.cfg.n_steps):
            step = np.eye(self.param_dim) + dt * _rhs_jacobian(x, self.cfg.forcing)
            jac = step @ jac
            x = x + dt * l96_rhs(x, self.cfg.forcing)
        return jac
