"""Counter-based random streams derived from a single master seed.

Every consumer of randomness asks for a stream by a key such as
``("env", period)`` or ``("phc", period, round, candidate)``.  The key is
hashed into the spawn key of a :class:`numpy.random.SeedSequence` and the
resulting PCG64 generator is independent of every other key, so results
do not depend on the order in which streams are requested.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_word(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    raise TypeError(f"stream key parts must be str or non-negative int, got {part!r}")


class StreamFactory:
    """Hands out independent :class:`numpy.random.Generator` objects by key."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)

    def stream(self, *key) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key_word(p) for p in key))
        return np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"StreamFactory(seed={self.seed})"
