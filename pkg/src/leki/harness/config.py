"""Experiment configuration (TOML) and the shipped presets.

Schema (all keys optional except ``experiment``)::

    experiment = "linear"            # linear | nonlinear | lorenz96 | dc-resistivity | custom
    dims = [5, 50, 100]
    ensemble_sizes = [50]
    trials = 20
    seed = 1
    methods = ["eki", "leki"]
    inflation_sigma = 0.0
    noise_std = 1.0
    diagnostics_level = "basic"      # basic | full
    data_file = "field.csv"          # DC only; columns ab_over_2_m, apparent_resistivity_ohm_m, std_ohm_m

    [localization]                   # used by the "leki" method
    scheme = "linearized"            # param-param-only | centralized | linearized | mixed
    kernel = "identity"              # gaussian | gaspari-cohn | hard-cutoff | identity
    radius = 1.0
    metric = "lattice"               # lattice | periodic-lattice | log-grid

    [step_policy]
    kind = "fixed"                   # fixed | misfit-threshold
    dt = 0.1
    stages = [[inf, 0.01], [8.0, 0.1], [6.0, 0.5]]

    [stopping]
    max_iterations = 500
    target_scaled_misfit = 1.1

    [teki]
    c0 = "identity"                  # identity | scalar | diagonal list | CSV path

    [model]                          # model-specific options, see the presets
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..dynamics import StepPolicy, StoppingRule
from ..errors import ConfigurationError
from ..localization import KERNEL_KINDS, METRIC_KINDS, SCHEME_KINDS

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ExperimentConfig", "LocalizationSpec", "load_config", "load_preset", "PRESETS", "parse_config"]

EXPERIMENTS = ("linear", "nonlinear", "lorenz96", "dc-resistivity", "custom")
PRESETS = ("linear", "nonlinear", "lorenz96", "dc")
METHODS = ("eki", "leki")


@dataclass(frozen=True)
class LocalizationSpec:
    scheme: str = "linearized"
    kernel: str = "identity"
    radius: float = 1.0
    metric: str = "lattice"
    enabled: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEME_KINDS:
            raise ConfigurationError(f"unknown localization scheme {self.scheme!r}")
        if self.kernel not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if self.metric not in METRIC_KINDS:
            raise ConfigurationError(f"unknown distance metric {self.metric!r}")
        if not self.radius > 0:
            raise ConfigurationError("localization radius must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dims: Tuple[int, ...] = (10,)
    ensemble_sizes: Tuple[int, ...] = (10,)
    trials: int = 1
    seed: int = 0
    methods: Tuple[str, ...] = METHODS
    localization: LocalizationSpec = LocalizationSpec()
    inflation_sigma: float = 0.0
    noise_std: float = 1.0
    teki: Optional[Any] = None
    step_policy: StepPolicy = StepPolicy()
    stopping: StoppingRule = StoppingRule()
    diagnostics_level: str = "basic"
    data_file: Optional[str] = None
    model: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if not self.dims or not self.ensemble_sizes:
            raise ConfigurationError("dims and ensemble_sizes must be nonempty")
        if any(d < 1 for d in self.dims) or any(j < 2 for j in self.ensemble_sizes):
            raise ConfigurationError("dims must be >= 1 and ensemble sizes >= 2")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigurationError(f"methods must be a nonempty subset of {METHODS}")
        if self.diagnostics_level not in ("basic", "full"):
            raise ConfigurationError("diagnostics_level must be basic or full")
        if self.inflation_sigma < 0 or self.noise_std < 0:
            raise ConfigurationError("inflation_sigma and noise_std must be nonnegative")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return dict(sec)


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed TOML mapping."""
    raw = dict(raw)
    known = {"experiment", "dims", "ensemble_sizes", "trials", "seed", "methods", "localization",
             "inflation_sigma", "noise_std", "teki", "step_policy", "stopping",
             "diagnostics_level", "data_file", "model"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigurationError("config must set 'experiment'")
    try:
        loc = _section(raw, "localization")
        loc_spec = LocalizationSpec(
            scheme=str(loc.pop("scheme", "linearized")),
            kernel=str(loc.pop("kernel", "identity")),
            radius=float(loc.pop("radius", 1.0)),
            metric=str(loc.pop("metric", "lattice")),
            enabled=bool(loc.pop("enabled", True)),
        )
        if loc:
            raise ConfigurationError(f"unknown [localization] keys: {sorted(loc)}")
        sp = _section(raw, "step_policy")
        policy = StepPolicy(
            kind=str(sp.get("kind", "fixed")),
            dt=float(sp.get("dt", 0.1)),
            stages=tuple(tuple(float(v) for v in st) for st in sp.get("stages", ())),
        )
        so = _section(raw, "stopping")
        target = so.get("target_scaled_misfit")
        stopping = StoppingRule(
            max_iterations=int(so.get("max_iterations", 100)),
            target_scaled_misfit=None if target is None else float(target),
            fail_on_nonfinite=bool(so.get("fail_on_nonfinite", True)),
        )
        teki = _section(raw, "teki").get("c0") if "teki" in raw else None
        return ExperimentConfig(
            experiment=str(raw["experiment"]),
            dims=tuple(int(d) for d in raw.get("dims", (10,))),
            ensemble_sizes=tuple(int(j) for j in raw.get("ensemble_sizes", (10,))),
            trials=int(raw.get("trials", 1)),
            seed=int(raw.get("seed", 0)),
            methods=tuple(str(m) for m in raw.get("methods", METHODS)),
            localization=loc_spec,
            inflation_sigma=float(raw.get("inflation_sigma", 0.0)),
            noise_std=float(raw.get("noise_std", 1.0)),
            teki=teki,
            step_policy=policy,
            stopping=stopping,
            diagnostics_level=str(raw.get("diagnostics_level", "basic")),
            data_file=raw.get("data_file"),
            model=_section(raw, "model"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    cfg = parse_config(raw)
    if cfg.data_file is not None and not Path(cfg.data_file).is_absolute():
        cfg = cfg.with_overrides(data_file=str(path.parent / cfg.data_file))
    return cfg


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("leki.presets").joinpath(f"{name}.toml").read_text()
    return parse_config(tomllib.loads(text))
