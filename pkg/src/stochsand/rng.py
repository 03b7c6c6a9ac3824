"""Seeded random streams.

One root seed per experiment; every run, replica or sweep cell derives its own
stream from ``(root, *key)`` so results do not depend on execution order.
"""
import numpy as np


def make_rng(seed, *key):
    """Return an independent generator for ``(seed, *key)``."""
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive keyed streams from a Generator")
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng):
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(rng)
