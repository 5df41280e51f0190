"""
Seeded, reproducible random number substreams.

Every Monte Carlo replicate draws from its own Philox generator keyed by
``SeedSequence(seed, spawn_key=(stream, replicate, ...))``, so a replicate's
numbers depend only on the seed and its key, never on which worker ran it.
"""

from typing import Tuple, Union

import numpy as np

SeedLike = Union[int, Tuple[int, ...], np.random.Generator]

# Stream identifiers, one per independent source of randomness in a run.
STREAM_GAUSS = 1
STREAM_PPP = 2
STREAM_SPECTRAL = 3
STREAM_PRELIMIT = 4
STREAM_COPIES = 5
STREAM_RADIAL = 6


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Builds a counter-based generator from an int, a (seed, *key) tuple, or passes a Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, tuple):
        if not seed:
            raise ValueError("seed tuple must contain at least the base seed")
        base, *key = seed
        sequence = np.random.SeedSequence(int(base), spawn_key=tuple(int(k) for k in key))
    else:
        sequence = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(sequence))


def substream(seed: int, *key: int) -> np.random.Generator:
    return make_rng((seed, *key))


def extend_seed(seed: SeedLike, *key: int) -> Tuple[int, ...]:
    """Appends ``key`` to an int or tuple seed, giving the seed of a child substream."""
    if isinstance(seed, np.random.Generator):
        raise TypeError("a Generator cannot be split into keyed substreams")
    base = seed if isinstance(seed, tuple) else (int(seed),)
    return (*base, *(int(k) for k in key))
