"""Deterministic RNG substreams.

Everything stochastic in the package draws from numpy Generators derived
from one master seed plus a counter-style key, so independent parts of a
run (selection, per-user channel noise, unwatermarked sampling) consume
non-overlapping streams and reruns reproduce byte-identical results.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream identified by ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))
