"""One-dimensional Schlumberger DC resistivity.

Apparent resistivity at half-spacing ``s = AB/2`` is

    rho_a(s) = s**2 * integral_0^inf T_1(lambda) J_1(s lambda) lambda d lambda

with ``T_1`` the Koefoed resistivity transform of the layered earth. The
integral only exists in the Abel sense, because ``T_1`` tends to the top-layer
resistivity ``u_1`` as ``lambda -> inf``. Since the Abel value of
``s**2 * integral J_1(s lambda) lambda d lambda`` is 1, we write

    rho_a(s) = u_1 + integral_0^inf (T_1(x / s) - u_1) J_1(x) x dx

whose integrand decays exponentially, and evaluate it with a digital linear
filter (default) or with Gauss-Legendre quadrature between the zeros of J_1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional, Tuple

import numpy as np
from scipy import special

from ..errors import ConfigurationError, DomainError, NumericFailure
from .base import ForwardModel

__all__ = [
    "DcResistivityConfig",
    "DcResistivityModel",
    "koefoed_transform",
    "apparent_resistivity",
    "apparent_resistivity_quad",
    "dc_forward",
    "layer_thicknesses",
    "layer_log_centers",
    "nearest_layer_map",
    "load_j1_filter",
    "DEFAULT_HALF_SPACINGS",
]

DEFAULT_HALF_SPACINGS = np.logspace(0.0, 4.0, 29)
FILTER_METHODS = ("dlf", "quadrature")


@lru_cache(maxsize=None)
def load_j1_filter() -> Tuple[np.ndarray, np.ndarray]:
    """Abscissae and J1 weights of the 47-point filter (see data/FILTERS.md)."""
    text = resources.files("leki.models").joinpath("data/gupt_47_1997_j1.csv").read_text()
    table = np.loadtxt(text.splitlines(), delimiter=",", skiprows=1)
    base, weights = table[:, 0].copy(), table[:, 1].copy()
    base.setflags(write=False)
    weights.setflags(write=False)
    return base, weights


def layer_thicknesses(layer_count: int, depth_min: float, depth_max: float) -> np.ndarray:
    """Thicknesses between ``layer_count`` log-spaced boundaries.

    Layer ``i`` lies between boundaries ``z_i`` and ``z_{i+1}``; the last
    layer is the terminating half-space, so there are ``layer_count - 1``
    thicknesses.
    """
    z = np.logspace(np.log10(depth_min), np.log10(depth_max), layer_count)
    return np.diff(z)


def layer_log_centers(layer_count: int, depth_min: float, depth_max: float) -> np.ndarray:
    """log10 of each layer's centre depth, used as a localization coordinate."""
    logz = np.linspace(np.log10(depth_min), np.log10(depth_max), layer_count)
    step = logz[1] - logz[0] if layer_count > 1 else 0.0
    return logz + 0.5 * step


def nearest_layer_map(log_centers, half_spacings) -> np.ndarray:
    """Index of the layer whose log-depth is closest to ``log10(AB/2)``."""
    log_s = np.log10(np.asarray(half_spacings, dtype=float))
    return np.argmin(np.abs(np.asarray(log_centers)[None, :] - log_s[:, None]), axis=1)


def _check_positive(u: np.ndarray) -> None:
    if not np.all(u > 0):
        raise DomainError("resistivities must be positive")


def koefoed_transform(u, thicknesses, lam) -> np.ndarray:
    """Koefoed resistivity transform ``T_1(lambda)``.

    The recursion starts with ``T = u[-1]`` (half-space) and moves up with
    ``T_i = (T_{i+1} + u_i tanh(lambda t_i)) / (1 + T_{i+1} tanh(lambda t_i) / u_i)``.

    Parameters
    ----------
    u : array_like
        Resistivities, shape ``(d,)`` or ``(d, J)`` for a batch of models.
    thicknesses : array_like
        ``d - 1`` layer thicknesses.
    lam : array_like
        Positive wavenumbers of any shape.

    Returns
    -------
    ndarray
        Shape ``lam.shape`` for a single model, ``(J,) + lam.shape`` for a batch.
    """
    u = np.asarray(u, dtype=float)
    t = np.asarray(thicknesses, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if u.shape[0] != t.size + 1:
        raise ConfigurationError(f"{u.shape[0]} resistivities need {u.shape[0] - 1} thicknesses")
    _check_positive(u)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    extra = (1,) * lam.ndim
    rho = u.reshape(u.shape + extra)
    T = np.broadcast_to(rho[-1], np.broadcast_shapes(rho[-1].shape, lam.shape)).copy()
    for i in range(t.size - 1, -1, -1):
        th = np.tanh(lam * t[i])
        T = (T + rho[i] * th) / (1.0 + T * th / rho[i])
    return T


def apparent_resistivity(u, thicknesses, s) -> np.ndarray:
    """Apparent resistivity via the 47-point J1 filter.

    ``u`` may be ``(d,)`` or ``(d, J)``; ``s`` is a scalar or vector of
    half-spacings. Returns shape ``s.shape`` or ``(len(s), J)``.
    """
    base, weights = load_j1_filter()
    u = np.asarray(u, dtype=float)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr <= 0):
        raise DomainError("half-spacings must be positive")
    lam = base[None, :] / s_arr[:, None]
    T = koefoed_transform(u, thicknesses, lam)
    if u.ndim == 1:
        rho = u[0] + np.sum((T - u[0]) * (base * weights), axis=-1)
    else:
        top = u[0][:, None]
        rho = (top + np.sum((T - top[..., None]) * (base * weights), axis=-1)).T
    if np.ndim(s) == 0:
        return rho[0]
    return rho


def _j1_zeros(n: int) -> np.ndarray:
    """First ``n`` positive zeros of J1 (McMahon start, Newton polish)."""
    if n <= 200:
        return special.jn_zeros(1, n)
    head = special.jn_zeros(1, 200)
    k = np.arange(201, n + 1, dtype=float)
    beta = (k + 0.25) * np.pi
    x = beta - 3.0 / (8.0 * beta)
    for _ in range(3):
        j1 = special.j1(x)
        dj1 = special.j0(x) - j1 / x
        x = x - j1 / dj1
    return np.concatenate([head, x])


def apparent_resistivity_quad(
    u, thicknesses, s: float, *, nodes: int = 16, chunk: int = 512,
    max_intervals: int = 400_000, tol: float = 1e-12,
) -> float:
    """Apparent resistivity by Gauss-Legendre quadrature between zeros of J1.

    Integrates ``(T_1(x/s) - u_1) J_1(x) x`` interval by interval until the
    envelope ``|T_1 - u_1| sqrt(x)`` drops below ``tol`` times the resistivity
    scale, then averages the last partial sums to damp the residual
    oscillation. Slow; intended as an independent check of the filter.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ConfigurationError("quadrature path handles one model at a time")
    _check_positive(u)
    if not s > 0:
        raise DomainError("half-spacing must be positive")
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    scale = float(np.max(u))
    zeros = np.concatenate([[0.0], _j1_zeros(max_intervals)])
    partial = []
    total = 0.0
    for start in range(0, max_intervals, chunk):
        a = zeros[start:start + chunk]
        b = zeros[start + 1:start + chunk + 1]
        half = 0.5 * (b - a)
        x = (0.5 * (a + b))[:, None] + half[:, None] * gx[None, :]
        g = koefoed_transform(u, thicknesses, x / s) - u[0]
        pieces = np.sum(g * special.j1(x) * x * gw[None, :], axis=1) * half
        sums = total + np.cumsum(pieces)
        partial.extend(sums[-8:].tolist())
        total = float(sums[-1])
        envelope = np.max(np.abs(g[-1])) * np.sqrt(x[-1, -1])
        if envelope < tol * scale:
            tail = np.asarray(partial[-8:])
            while tail.size > 1:
                tail = 0.5 * (tail[1:] + tail[:-1])
            return float(u[0] + tail[0])
    raise NumericFailure(f"quadrature did not converge for s={s}")


@dataclass(frozen=True)
class DcResistivityConfig:
    """Layered-earth geometry and measurement layout.

    ``thicknesses`` overrides the log-spaced layering (used for small truth
    models); otherwise ``layer_count`` boundaries are log-spaced between
    ``depth_min`` and ``depth_max``.
    """

    layer_count: int = 20
    depth_min: float = 0.1
    depth_max: float = 1e5
    half_spacings: np.ndarray = field(default_factory=lambda: DEFAULT_HALF_SPACINGS.copy())
    filter: str = "dlf"
    thicknesses: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.filter not in FILTER_METHODS:
            raise ConfigurationError(f"unknown Hankel method {self.filter!r}")
        s = np.asarray(self.half_spacings, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(s <= 0):
            raise ConfigurationError("half_spacings must be a nonempty vector of positive values")
        object.__setattr__(self, "half_spacings", s)
        if self.thicknesses is not None:
            t = np.asarray(self.thicknesses, dtype=float)
            if np.any(t <= 0):
                raise ConfigurationError("thicknesses must be positive")
            object.__setattr__(self, "thicknesses", t)
            object.__setattr__(self, "layer_count", t.size + 1)
        else:
            if self.layer_count < 2:
                raise ConfigurationError("need at least two layers")
            if not 0 < self.depth_min < self.depth_max:
                raise ConfigurationError("depths must be positive and strictly increasing")

    def layer_thicknesses(self) -> np.ndarray:
        if self.thicknesses is not None:
            return self.thicknesses
        return layer_thicknesses(self.layer_count, self.depth_min, self.depth_max)

    def log_centers(self) -> np.ndarray:
        if self.thicknesses is not None:
            tops = np.concatenate([[0.0], np.cumsum(self.thicknesses)])
            bottoms = np.concatenate([tops[1:], [2.0 * tops[-1]]])
            return np.log10(0.5 * (tops + bottoms))
        return layer_log_centers(self.layer_count, self.depth_min, self.depth_max)


def dc_forward(u, cfg: DcResistivityConfig) -> np.ndarray:
    """Apparent resistivity at every configured half-spacing."""
    t = cfg.layer_thicknesses()
    if cfg.filter == "dlf":
        return apparent_resistivity(u, t, cfg.half_spacings)
    u = np.asarray(u, dtype=float)
    return np.array([apparent_resistivity_quad(u, t, s) for s in cfg.half_spacings])


class DcResistivityModel(ForwardModel):
    """Schlumberger sounding forward model; outputs are centred at the layer
    nearest in log-depth to each half-spacing."""

    def __init__(self, cfg: DcResistivityConfig = DcResistivityConfig()):
        self.cfg = cfg
        self.param_dim = cfg.layer_count
        self.output_dim = cfg.half_spacings.size
        self._t = cfg.layer_thicknesses()
        self.center_map = nearest_layer_map(cfg.log_centers(), cfg.half_spacings)

    def evaluate(self, u):
        return dc_forward(self._check_input(u), self.cfg)

    def evaluate_ensemble(self, members):
        members = np.asarray(members, dtype=float)
        if self.cfg.filter == "dlf":
            return apparent_resistivity(members, self._t, self.cfg.half_spacings)
        return super().evaluate_ensemble(members)
