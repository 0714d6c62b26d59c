"""Deterministic random streams keyed by integer tuples."""

import numpy as np

_MASK = (1 << 64) - 1


def _entropy(keys):
    # SeedSequence rejects negative ints; fold everything into uint64 range
    return [int(k) & _MASK for k in keys]


def rng_for(*keys) -> np.random.Generator:
    """PCG64 generator whose stream depends only on ``keys``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_entropy(keys))))


def derive_seed(*keys) -> int:
    """A 31-bit integer seed derived from ``keys`` (stable across platforms)."""
    state = np.random.SeedSequence(_entropy(keys)).generate_state(1, dtype=np.uint32)
    return int(state[0] >> 1)
