"""Forward models: linear, local cubic, Lorenz-96 and DC resistivity."""
from .base import ForwardModel, FunctionModel, WhitenedModel, finite_difference_jacobian
from .linear import LinearModel, linear_eval
from .local_cubic import LocalCubicModel, local_cubic_eval
from .lorenz96 import Lorenz96Config, Lorenz96Model, l96_forward, l96_integrate_rk4, l96_rhs
from .resistivity import (
    DcResistivityConfig,
    DcResistivityModel,
    apparent_resistivity,
    apparent_resistivity_quad,
    dc_forward,
    koefoed_transform,
)

__all__ = [
    "ForwardModel",
    "FunctionModel",
    "WhitenedModel",
    "finite_difference_jacobian",
    "LinearModel",
    "linear_eval",
    "LocalCubicModel",
    "local_cubic_eval",
    "Lorenz96Config",
    "Lorenz96Model",
    "l96_forward",
    "l96_integrate_rk4",
    "l96_rhs",
    "DcResistivityConfig",
    "DcResistivityModel",
    "apparent_resistivity",
    "apparent_resistivity_quad",
    "dc_forward",
    "koefoed_transform",
]
