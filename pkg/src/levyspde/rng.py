"""Counter-based random streams.

A stream is addressed by (seed, replicate, step, purpose). The first two
words form the Philox key and the last two sit in the counter, so any
stream can be produced independently of every other one. This is what
makes results independent of worker count and scheduling order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

NOISE = 0
BOOTSTRAP = 1
CHAOS = 2
PROBE = 3


def stream(seed: int, replicate: int = 0, step: int = 0, purpose: int = NOISE) -> np.random.Generator:
    key = np.array([seed & _MASK64, replicate & _MASK64], dtype=np.uint64)
    counter = np.array([0, step & _MASK64, purpose & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
