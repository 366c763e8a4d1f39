"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator, seeded from a
``SeedSequence``; independent streams are obtained by spawning children,
so results never depend on how work is scheduled across threads.
"""

from __future__ import annotations

from typing import List, Union

import numpy as np

RNG_ALGORITHM = "PCG64"

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed: Union[int, np.random.SeedSequence], n: int) -> List[np.random.SeedSequence]:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)
