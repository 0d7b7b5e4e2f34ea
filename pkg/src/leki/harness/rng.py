"""Per-trial random streams.

Every draw comes from ``Philox(SeedSequence(seed, spawn_key=(dim, trial_id, role)))``,
so a trial's truth, noise and initial ensemble do not depend on which worker
runs it or in which order. Streams are shared across ensemble sizes, so the
cells of a J-sweep see the same truths and noise.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError

__all__ = ["ROLES", "stream"]

ROLES = {"truth": 0, "noise": 1, "init": 2}


def stream(seed: int, trial_id: int, role: str, dim: int = 0) -> np.random.Generator:
    if role not in ROLES:
        raise ConfigurationError(f"unknown stream role {role!r}")
    if seed < 0 or trial_id < 0:
        raise ConfigurationError("seed and trial_id must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(dim), int(trial_id), ROLES[role]))
    return np.random.Generator(np.random.Philox(ss))
