"""Deterministic counter-based random streams.

Every random draw in the package comes from a Philox stream keyed by a
(seed, *tags) tuple.  Streams are independent and order-free: the stream
for ("id", 7) produces the same values whether it is created first, last,
or from a worker thread, which is what makes parallel generation and
scoring reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *tags: str | int) -> np.ndarray:
    """Derive a 128-bit Philox key from a seed and a tag tuple."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    h = hashlib.blake2b(digest_size=16)
    h.update(seed.to_bytes(8, "little"))
    for tag in tags:
        part = str(tag).encode("utf-8")
        # length-prefixed so ("ab", "c") and ("a", "bc") never collide
        h.update(len(part).to_bytes(4, "little"))
        h.update(part)
    return np.frombuffer(h.digest(), dtype=np.uint64)


def stream(seed: int, *tags: str | int) -> np.random.Generator:
    """Generator bound to the (seed, *tags) stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *tags)))


def random_bit_row(seed: int, *tags: str | int, num_bytes: int) -> np.ndarray:
    """Uniform random packed bits (uint8) for one hypervector row."""
    return stream(seed, *tags).integers(0, 256, size=num_bytes, dtype=np.uint8)
