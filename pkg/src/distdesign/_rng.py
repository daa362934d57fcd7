"""Seed handling shared by the Monte Carlo routines."""
import numpy as np


def seed_sequence(seed):
    """``SeedSequence`` for an int, ``None`` or an existing sequence.

    An existing sequence is copied, so spawning children from the result
    never changes the caller's object.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key,
                                      pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)
