"""Seeded random streams.

Every random draw in the package comes from a generator keyed by the user
seed plus a tuple of integers naming its role (replicate number, retry
attempt, purpose tag).  Results therefore never depend on how work is
scheduled across workers.
"""
import os

import numpy as np

SEED_ENV = "WEAKGRAPH_SEED"

# purpose tags, kept distinct so that streams never collide
BOOTSTRAP = 1
UNIFORM_RECTANGLE = 2
SPLIT = 3
CENTERS = 4
SAMPLE = 5
REPLICATE = 6


def substream(seed, *key):
    """Independent generator for ``(seed, key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def default_seed(fallback=0):
    """Seed from ``$WEAKGRAPH_SEED`` when set, else ``fallback``."""
    value = os.environ.get(SEED_ENV)
    return int(value) if value not in (None, "") else fallback


def derive_seed(seed, *key):
    """A 63-bit integer seed for ``(seed, key)``, for handing to other calls."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 31) ^ int(lo)
