"""Seed derivation.

All randomness descends from one user seed. A component asks for a generator
with ``derive_rng(seed, "component", index, ...)``; string keys are hashed
with CRC-32 and integer keys are used verbatim, and the resulting tuple is fed
to :class:`numpy.random.SeedSequence` as its spawn key. Two different key
paths therefore give statistically independent streams, and the same path
always gives the same stream regardless of call order.
"""

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        return int(part) & MASK64
    raise TypeError(f"seed key parts must be str or int, got {type(part).__name__}")


def derive_rng(seed, *keys):
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def item_seed(seed, index):
    """Per-item seed: ``seed XOR hash(index)``, independent of scheduling order."""
    return (int(seed) ^ splitmix64(int(index))) & MASK64
