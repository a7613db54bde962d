"""Seeded random streams.

Every stochastic component draws from a named stream derived from one
master seed, using the counter-based Philox generator.  Streams are
independent of each other, so e.g. the random chain delays never share
state with the job outcomes.
"""
from __future__ import annotations

import numpy as np

OUTCOMES = 0
DELAYS = 1
TRIALS = 2


def stream(seed: int, name: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``name`` (optionally sub-keyed) of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(name, *key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, name: int, *key: int) -> int:
    """A 63-bit integer seed derived deterministically from ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(name, *key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

