"""Dimensional packing: sum groups of n adjacent bits into one cell level.

A binary vector of length D becomes an integer vector of length
ceil(D/n) with values in [0, n], one value per multi-level cell.  The
bit vector is zero-padded when n does not divide D.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes
from .hdc import Hypervector

__all__ = [
    "PackedVector",
    "pack",
    "pack_bit_rows",
    "bits_per_cell",
    "write_packed_library",
    "read_packed_library",
]


@dataclass
class PackedVector:
    """Integer cell levels produced by packing; levels[j] in [0, n]."""

    n: int
    levels: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= 255:
            raise ValueError(f"packing factor must be in [1, 255], got {self.n}")
        self.levels = np.asarray(self.levels, dtype=np.uint8)
        if self.levels.ndim != 1 or self.levels.size == 0:
            raise ValueError("levels must be a non-empty 1-D array")
        if self.levels.max() > self.n:
            raise ValueError(f"levels must be <= n ({self.n})")

    @property
    def padded_dim(self) -> int:
        return self.levels.size * self.n

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PackedVector)
            and self.n == other.n
            and bool(np.array_equal(self.levels, other.levels))
        )


def _pad_to_multiple(bits: np.ndarray, n: int) -> np.ndarray:
    rem = bits.shape[-1] % n
    if rem == 0:
        return bits
    pad = [(0, 0)] * (bits.ndim - 1) + [(0, n - rem)]
    return np.pad(bits, pad, constant_values=0)


def pack(h: Hypervector, n: int) -> PackedVector:
    """Sum each run of n adjacent bits into one level."""
    if n < 1:
        raise ValueError(f"packing factor must be >= 1, got {n}")
    bits = _pad_to_multiple(h.bits, n)
    levels = bits.reshape(-1, n).sum(axis=1, dtype=np.uint8)
    return PackedVector(n, levels)


def pack_bit_rows(rows: np.ndarray, dim: int, n: int) -> np.ndarray:
    """Pack a matrix of packed-bit rows into a (rows, ceil(dim/n)) level matrix."""
    if n < 1:
        raise ValueError(f"packing factor must be >= 1, got {n}")
    bits = np.unpackbits(rows, axis=1, count=dim, bitorder="little")
    bits = _pad_to_multiple(bits, n)
    return bits.reshape(rows.shape[0], -1, n).sum(axis=2, dtype=np.uint8)


def bits_per_cell(n: int) -> int:
    """Storage bits needed for the n+1 levels of one packed cell."""
    if n < 1:
        raise ValueError(f"packing factor must be >= 1, got {n}")
    return int(n).bit_length()


# ------------------------------------------------------ packed library file
#
# Little-endian header followed by one row per reference.  Each level is
# encoded in bits_per_cell(n) bits, least-significant bit first, and each
# row is padded to a whole byte.
#
#   magic   4 bytes  b"SFPK"
#   version u16      1
#   D       u32      original hypervector dimension
#   n       u16      packing factor
#   count   u32      number of rows

PK_MAGIC = b"SFPK"
PK_VERSION = 1
_PK_HEADER = struct.Struct("<4sHIHI")


def write_packed_library(path: str | Path, dim: int, n: int, levels: np.ndarray) -> None:
    if levels.ndim != 2 or levels.dtype != np.uint8:
        raise ValueError("levels must be a 2-D uint8 matrix")
    count, length = levels.shape
    if length != -(-dim // n):
        raise ValueError(f"row length {length} does not match ceil({dim}/{n})")
    b = bits_per_cell(n)
    bits = ((levels[:, :, None] >> np.arange(b, dtype=np.uint8)) & 1).astype(np.uint8)
    rows = np.packbits(bits.reshape(count, length * b), axis=1, bitorder="little")
    header = _PK_HEADER.pack(PK_MAGIC, PK_VERSION, dim, n, count)
    atomic_write_bytes(path, header + rows.tobytes())


def read_packed_library(path: str | Path) -> tuple[int, int, np.ndarray]:
    """Read a packed library file; returns (dim, n, levels matrix)."""
    blob = Path(path).read_bytes()
    if len(blob) < _PK_HEADER.size:
        raise ValueError(f"{path}: truncated packed library")
    magic, version, dim, n, count = _PK_HEADER.unpack_from(blob)
    if magic != PK_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != PK_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    length = -(-dim // n)
    b = bits_per_cell(n)
    row_bytes = -(-length * b // 8)
    body = blob[_PK_HEADER.size :]
    if len(body) != count * row_bytes:
        raise ValueError(f"{path}: expected {count * row_bytes} body bytes, found {len(body)}")
    rows = np.frombuffer(body, dtype=np.uint8).reshape(count, row_bytes)
    bits = np.unpackbits(rows, axis=1, count=length * b, bitorder="little")
    weights = (1 << np.arange(b)).astype(np.uint8)
    levels = (bits.reshape(count, length, b) * weights).sum(axis=2, dtype=np.uint8)
    if levels.size and levels.max() > n:
        raise ValueError(f"{path}: decoded level exceeds packing factor {n}")
    return dim, n, levels
