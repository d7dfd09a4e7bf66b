"""Splittable, platform-stable random streams.

Every stochastic routine takes a :class:`numpy.random.Generator`.  Streams
are derived from a master seed plus a path of tags (replicate index, grid
cell, purpose) through :class:`numpy.random.SeedSequence` spawn keys, so a
given path always yields the same stream regardless of evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("integer stream tags must be non-negative")
        return int(part)
    if isinstance(part, float):
        part = repr(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_tag(p) for p in path))


def stream(seed: int, *path) -> np.random.Generator:
    """Generator for ``(seed, *path)``; tags may be ints, floats or strings."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def child_streams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent sub-streams drawn from ``rng`` (advances ``rng`` once)."""
    root = np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return [np.random.Generator(np.random.PCG64(s)) for s in root.spawn(count)]


def counter_key(rng: np.random.Generator) -> np.uint64:
    """64-bit key for the counter-based label generator used by the kernels."""
    return np.uint64(rng.integers(0, 2**64, dtype=np.uint64))
