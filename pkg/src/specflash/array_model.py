"""Multi-level-cell NAND array model: layout, read counting, and cost.

Maps packed reference vectors onto a plane/block/string geometry, counts
sensing operations for the dual-bound search versus a conventional
row-by-row multi-level read, and turns counters into user-parameterized
latency/energy estimates.  Absolute device physics are out of scope; the
model is counter-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .packing import PackedVector

__all__ = [
    "ArrayGeometry",
    "ArrayLayout",
    "OpCounters",
    "CostParams",
    "CapacityError",
    "map_library",
    "count_reads_dual_bound",
    "count_reads_mlc_baseline",
    "read_speedup",
    "cost_report",
]


class CapacityError(ValueError):
    """Library does not fit the array; carries required vs. available."""

    def __init__(self, required: int, available: int, what: str = "strings"):
        super().__init__(f"capacity exceeded: need {required} {what}, have {available}")
        self.required = required
        self.available = available


@dataclass(frozen=True)
class ArrayGeometry:
    wordlines: int = 512         # cells per string
    bitlines_per_block: int = 4096
    blocks_per_plane: int = 128
    planes: int = 2

    def __post_init__(self):
        for name in ("wordlines", "bitlines_per_block", "blocks_per_plane", "planes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total_strings(self) -> int:
        return self.planes * self.blocks_per_plane * self.bitlines_per_block


@dataclass
class ArrayLayout:
    """Placement of every (reference, fold) pair onto a physical string."""

    geometry: ArrayGeometry
    folds_per_hv: int
    string_assignment: dict[tuple[str, int], tuple[int, int, int]]


@dataclass(frozen=True)
class OpCounters:
    sensing_reads: int = 0
    wordline_activations: int = 0
    subsets_evaluated: int = 0

    def __add__(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(
            self.sensing_reads + other.sensing_reads,
            self.wordline_activations + other.wordline_activations,
            self.subsets_evaluated + other.subsets_evaluated,
        )

    def scaled(self, k: int) -> "OpCounters":
        return OpCounters(
            self.sensing_reads * k,
            self.wordline_activations * k,
            self.subsets_evaluated * k,
        )


@dataclass(frozen=True)
class CostParams:
    t_read: float = 1e-6   # seconds per sensing read
    e_read: float = 1e-12  # joules per sensing read
    z_scale: float = 4.0   # string-length scaling factor, informational

    def __post_init__(self):
        if self.t_read <= 0 or self.e_read <= 0 or self.z_scale <= 0:
            raise ValueError("cost parameters must be positive")


def map_library(
    refs: Sequence[tuple[str, PackedVector]], g: ArrayGeometry
) -> ArrayLayout:
    """Round-robin fold placement: fold f of reference r goes to block
    (f mod blocks) in plane (r mod planes), at the next free bitline.

    Deterministic; raises CapacityError when the array cannot hold the
    library (including a plane/block bucket running out of bitlines).
    """
    if not refs:
        raise ValueError("cannot map an empty library")
    length = refs[0][1].levels.size
    folds = math.ceil(length / g.wordlines)
    required = len(refs) * folds
    if required > g.total_strings:
        raise CapacityError(required, g.total_strings)

    next_bitline: dict[tuple[int, int], int] = {}
    assignment: dict[tuple[str, int], tuple[int, int, int]] = {}
    for r, (ref_id, vec) in enumerate(refs):
        if vec.levels.size != length:
            raise ValueError(f"reference {ref_id!r}: inconsistent packed length")
        plane = r % g.planes
        for f in range(folds):
            block = f % g.blocks_per_plane
            bitline = next_bitline.get((plane, block), 0)
            if bitline >= g.bitlines_per_block:
                raise CapacityError(bitline + 1, g.bitlines_per_block, what="bitlines in a block")
            next_bitline[(plane, block)] = bitline + 1
            assignment[(ref_id, f)] = (plane, block, bitline)
    return ArrayLayout(g, folds, assignment)


def count_reads_dual_bound(dim: int, n: int, m: int) -> OpCounters:
    """Per-reference sensing work for the dual-bound search.

    Each m-subset needs one upper-bound and one lower-bound sensing read,
    and each read activates m wordlines at once.
    """
    if dim < 1 or n < 1 or m < 1:
        raise ValueError("dim, n, m must all be >= 1")
    cells = -(-dim // n)
    subsets = -(-cells // m)
    reads = 2 * subsets
    return OpCounters(reads, m * reads, subsets)


def count_reads_mlc_baseline(dim: int, n: int) -> OpCounters:
    """Per-reference sensing work for a conventional row-by-row read.

    Resolving one n-bit-packed cell row takes 2**n - 1 sequential sense
    operations, one wordline at a time.
    """
    if dim < 1 or n < 1:
        raise ValueError("dim and n must be >= 1")
    cells = -(-dim // n)
    reads = (2**n - 1) * cells
    return OpCounters(reads, reads, cells)


def read_speedup(m: int, n: int) -> float:
    """Read-count ratio of the conventional read to the dual-bound read,
    m * (2**n - 1) / 2; exact whenever m divides the packed length."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return m * (2**n - 1) / 2


def cost_report(
    c: OpCounters, p: CostParams, refs: int, parallel_strings: int
) -> tuple[float, float]:
    """Latency and energy for scanning `refs` references.

    Strings sense concurrently; references beyond the parallel string
    capacity serialize into extra passes.  Energy scales with every read
    actually performed.
    """
    if parallel_strings < 1:
        raise ValueError(f"parallel_strings must be >= 1, got {parallel_strings}")
    if refs < 0:
        raise ValueError(f"refs must be >= 0, got {refs}")
    passes = math.ceil(refs / parallel_strings) if refs else 0
    latency = c.sensing_reads * p.t_read * passes
    energy = c.sensing_reads * p.e_read * refs
    return latency, energy
