"""Binary hypervector algebra: item memories and spectrum encoding.

A binned spectrum is encoded by XOR-binding each bin's random ID
hypervector with the level hypervector for its intensity, then taking a
bitwise majority across all pairs.  ID hypervectors are independent
uniform random rows; level hypervectors form a flip chain so that the
Hamming distance between two levels grows linearly with their gap.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes
from .spectra import BinnedSpectrum
from .streams import random_bit_row

__all__ = [
    "HdcParams",
    "Hypervector",
    "ItemMemory",
    "generate_item_memory",
    "encode",
    "encode_entries",
    "hamming",
    "normalized_hamming",
    "save_hv_rows",
    "load_hv_rows",
    "save_item_memory",
    "load_item_memory",
]


@dataclass(frozen=True)
class HdcParams:
    """Dimension, alphabet sizes, and seed of one encoding space."""

    dimension: int = 8192
    num_ids: int = 1
    num_levels: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 64 or self.dimension % 64 != 0:
            raise ValueError(f"dimension must be >= 64 and divisible by 64, got {self.dimension}")
        if self.num_ids < 1:
            raise ValueError(f"num_ids must be >= 1, got {self.num_ids}")
        if self.num_levels < 2:
            raise ValueError(f"num_levels must be >= 2, got {self.num_levels}")
        if self.dimension < 2 * (self.num_levels - 1):
            raise ValueError(
                f"dimension {self.dimension} too small for {self.num_levels} levels "
                "(flip slices would be empty)"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be in [0, 2**64), got {self.seed}")

    @property
    def row_bytes(self) -> int:
        return self.dimension // 8


class Hypervector:
    """Dense binary vector stored as packed bytes, bit d = (byte[d//8] >> d%8) & 1."""

    __slots__ = ("dim", "packed")

    def __init__(self, dim: int, packed: np.ndarray):
        expected = (dim + 7) // 8
        if packed.dtype != np.uint8 or packed.shape != (expected,):
            raise ValueError(f"packed must be uint8 of shape ({expected},)")
        self.dim = dim
        self.packed = packed

    @classmethod
    def from_bits(cls, bits) -> "Hypervector":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size == 0:
            raise ValueError("bits must be a non-empty 1-D array")
        if not np.all(bits <= 1):
            raise ValueError("bits must be 0/1")
        return cls(bits.size, np.packbits(bits, bitorder="little"))

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.dim, bitorder="little")

    def popcount(self) -> int:
        return int(np.bitwise_count(self.packed).sum())

    def __xor__(self, other: "Hypervector") -> "Hypervector":
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return Hypervector(self.dim, self.packed ^ other.packed)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Hypervector)
            and self.dim == other.dim
            and bool(np.array_equal(self.packed, other.packed))
        )

    def __repr__(self) -> str:
        return f"Hypervector(dim={self.dim}, popcount={self.popcount()})"


def hamming(a: Hypervector, b: Hypervector) -> int:
    """Exact Hamming distance via popcount of the XOR."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return int(np.bitwise_count(a.packed ^ b.packed).sum())


def normalized_hamming(a: Hypervector, b: Hypervector) -> float:
    return hamming(a, b) / a.dim


@dataclass
class ItemMemory:
    """Deterministic ID and level hypervector banks plus the tie-break row.

    Rows are packed bits, one row per hypervector.  The whole structure
    is a pure function of its params and is immutable after generation.
    """

    params: HdcParams
    id_rows: np.ndarray      # (num_ids, dimension/8) uint8
    level_rows: np.ndarray   # (num_levels, dimension/8) uint8
    tie_row: np.ndarray      # (dimension/8,) uint8

    def id_hv(self, i: int) -> Hypervector:
        return Hypervector(self.params.dimension, self.id_rows[i])

    def level_hv(self, j: int) -> Hypervector:
        return Hypervector(self.params.dimension, self.level_rows[j])

    def tie_hv(self) -> Hypervector:
        return Hypervector(self.params.dimension, self.tie_row)


def generate_item_memory(p: HdcParams) -> ItemMemory:
    """Build the ID rows, the level flip chain, and the tie-break row.

    ID rows come from independent per-index streams.  The level chain
    starts from a random row; each step flips the next disjoint slice of
    floor(D / (2*(Q-1))) positions, so Hamming(level a, level b) equals
    |a - b| * slice_width exactly and the chain ends near D/2 from its
    start.
    """
    d, f, q = p.dimension, p.num_ids, p.num_levels
    nbytes = p.row_bytes

    id_rows = np.empty((f, nbytes), dtype=np.uint8)
    for i in range(f):
        id_rows[i] = random_bit_row(p.seed, "id", i, num_bytes=nbytes)

    width = d // (2 * (q - 1))
    level_bits = np.empty((q, d), dtype=np.uint8)
    level_bits[0] = np.unpackbits(
        random_bit_row(p.seed, "level", 0, num_bytes=nbytes), count=d, bitorder="little"
    )
    for j in range(1, q):
        level_bits[j] = level_bits[j - 1]
        lo = (j - 1) * width
        level_bits[j, lo : lo + width] ^= 1
    level_rows = np.packbits(level_bits, axis=1, bitorder="little")

    tie_row = random_bit_row(p.seed, "tie", num_bytes=nbytes)
    return ItemMemory(p, id_rows, level_rows, tie_row)


def encode_entries(mem: ItemMemory, bin_idx: np.ndarray, level_idx: np.ndarray) -> np.ndarray:
    """Packed bits of the majority over the bound (ID XOR level) rows.

    With an even entry count, dimensions split exactly in half take the
    tie-break row's bit.
    """
    n = bin_idx.size
    if n == 0:
        raise ValueError("encoder requires at least one (bin, level) entry")
    if bin_idx.min() < 0 or bin_idx.max() >= mem.params.num_ids:
        raise ValueError("bin index out of range for this item memory")
    if level_idx.min() < 0 or level_idx.max() >= mem.params.num_levels:
        raise ValueError("level index out of range for this item memory")

    bound = mem.id_rows[bin_idx] ^ mem.level_rows[level_idx]
    if n == 1:
        return bound[0].copy()
    counts = np.unpackbits(bound, axis=1, bitorder="little").sum(
        axis=0, dtype=np.int32
    )
    doubled = counts * 2
    out_bits = (doubled > n).astype(np.uint8)
    if n % 2 == 0:
        ties = doubled == n
        if ties.any():
            tie_bits = np.unpackbits(mem.tie_row, count=mem.params.dimension, bitorder="little")
            out_bits[ties] = tie_bits[ties]
    return np.packbits(out_bits, bitorder="little")


def encode(b: BinnedSpectrum, mem: ItemMemory) -> Hypervector:
    """Encode one binned spectrum into a binary hypervector."""
    if not b.entries:
        raise ValueError(f"spectrum {b.id!r}: encoder requires at least one peak")
    idx = np.asarray(b.entries, dtype=np.int64)
    packed = encode_entries(mem, idx[:, 0], idx[:, 1])
    return Hypervector(mem.params.dimension, packed)


# ------------------------------------------------------- binary dump format
#
# Little-endian header followed by packed bit rows (dimension/8 bytes per
# row); the row count is implied by the file size.
#
#   magic   4 bytes  b"SFHV"
#   version u16      1
#   D       u32      hypervector dimension
#   F       u32      number of ID hypervectors
#   Q       u32      number of level hypervectors
#   seed    u64      generation seed
#
# An item-memory dump holds F ID rows, then Q level rows, then the
# tie-break row (F + Q + 1 rows total).  An encoded-library dump holds
# one row per spectrum.

HV_MAGIC = b"SFHV"
HV_VERSION = 1
_HV_HEADER = struct.Struct("<4sHIIIQ")


def save_hv_rows(path: str | Path, params: HdcParams, rows: np.ndarray) -> None:
    if rows.ndim != 2 or rows.shape[1] != params.row_bytes or rows.dtype != np.uint8:
        raise ValueError(f"rows must be uint8 of shape (N, {params.row_bytes})")
    header = _HV_HEADER.pack(
        HV_MAGIC, HV_VERSION, params.dimension, params.num_ids, params.num_levels, params.seed
    )
    atomic_write_bytes(path, header + rows.tobytes())


def load_hv_rows(path: str | Path) -> tuple[HdcParams, np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < _HV_HEADER.size:
        raise ValueError(f"{path}: truncated hypervector file")
    magic, version, d, f, q, seed = _HV_HEADER.unpack_from(blob)
    if magic != HV_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != HV_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    params = HdcParams(dimension=d, num_ids=f, num_levels=q, seed=seed)
    body = blob[_HV_HEADER.size :]
    if len(body) % params.row_bytes != 0:
        raise ValueError(f"{path}: body size {len(body)} not a multiple of row size")
    rows = np.frombuffer(body, dtype=np.uint8).reshape(-1, params.row_bytes).copy()
    return params, rows


def save_item_memory(path: str | Path, mem: ItemMemory) -> None:
    rows = np.vstack([mem.id_rows, mem.level_rows, mem.tie_row[None, :]])
    save_hv_rows(path, mem.params, rows)


def load_item_memory(path: str | Path) -> ItemMemory:
    params, rows = load_hv_rows(path)
    expected = params.num_ids + params.num_levels + 1
    if rows.shape[0] != expected:
        raise ValueError(f"{path}: expected {expected} rows, found {rows.shape[0]}")
    f, q = params.num_ids, params.num_levels
    return ItemMemory(params, rows[:f], rows[f : f + q], rows[f + q])
