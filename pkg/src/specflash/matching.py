"""Dual-bound similarity scoring over packed level vectors.

A query is compared against a stored reference in consecutive subsets of
m packed dimensions, mirroring m wordlines activated at once on a serial
cell string.  Each subset contributes two indicator bits:

* upper-bound check: passes when every reference level in the subset
  sits at or below its query level plus alpha_pos (the string conducts
  only if all cells conduct);
* lower-bound check: passes when at least one reference level sits at or
  above its query level minus alpha_neg (no current through the string
  means at least one cell blocked, i.e. passed the lower bound).

The score is the number of passing checks across all subsets, so it
ranges over [0, 2 * num_subsets].  An optional noise model perturbs the
stored levels in the voltage domain with deterministic per-reference
Gaussian draws; query levels are applied as exact wordline voltages and
stay noiseless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .packing import PackedVector
from .streams import stream

__all__ = [
    "NoiseModel",
    "MatchConfig",
    "ScoreResult",
    "level_to_voltage",
    "noise_voltages",
    "upper_bound_check",
    "lower_bound_check",
    "dual_bound_score",
    "score_matrix",
]


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian threshold-voltage variation on stored levels."""

    sigma_vt: float = 0.2
    memory_window: float = 6.5
    seed: int = 0

    def __post_init__(self):
        if self.sigma_vt < 0:
            raise ValueError(f"sigma_vt must be >= 0, got {self.sigma_vt}")
        if self.memory_window <= 0:
            raise ValueError(f"memory_window must be > 0, got {self.memory_window}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be in [0, 2**64), got {self.seed}")


@dataclass(frozen=True)
class MatchConfig:
    """Tolerances and subset geometry of the dual-bound search.

    alpha_pos and alpha_neg are in level units; m is the number of packed
    dimensions compared per subset; n is the packing factor and must
    match the library being searched.
    """

    alpha_pos: float = 1.5
    alpha_neg: float = 1.5
    m: int = 1
    n: int = 1
    noise: NoiseModel | None = None

    def __post_init__(self):
        if self.alpha_pos < 0 or self.alpha_neg < 0:
            raise ValueError("alpha_pos and alpha_neg must be >= 0")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class ScoreResult:
    score: int
    ubc_passes: int
    lbc_passes: int
    num_subsets: int


def level_to_voltage(level: float, n: int, memory_window: float) -> float:
    """Spread the n+1 levels uniformly across the memory window."""
    if n < 1:
        raise ValueError(f"packing factor must be >= 1, got {n}")
    if not 0 <= level <= n:
        raise ValueError(f"level {level} outside [0, {n}]")
    return level * memory_window / n


def noise_voltages(noise: NoiseModel, ref_id: str, length: int) -> np.ndarray:
    """Per-dimension stored-voltage offsets for one reference.

    Deterministic in (noise.seed, ref_id, dimension index): the i-th draw
    of the reference's stream is the offset for dimension i, regardless
    of scoring order or parallelism.
    """
    draws = stream(noise.seed, "vt-noise", ref_id).standard_normal(length)
    return draws * noise.sigma_vt


def upper_bound_check(q_sub, r_sub, alpha_pos: float) -> int:
    """1 iff every reference level is <= its query level + alpha_pos."""
    q = np.asarray(q_sub, dtype=np.float64)
    r = np.asarray(r_sub, dtype=np.float64)
    if q.shape != r.shape:
        raise ValueError(f"subset length mismatch: {q.shape} vs {r.shape}")
    return int(np.all(r <= q + alpha_pos))


def lower_bound_check(q_sub, r_sub, alpha_neg: float) -> int:
    """1 iff at least one reference level is >= its query level - alpha_neg."""
    q = np.asarray(q_sub, dtype=np.float64)
    r = np.asarray(r_sub, dtype=np.float64)
    if q.shape != r.shape:
        raise ValueError(f"subset length mismatch: {q.shape} vs {r.shape}")
    return int(np.any(r >= q - alpha_neg))


def _num_subsets(length: int, m: int) -> int:
    return -(-length // m)


def score_matrix(
    q_levels: np.ndarray,
    ref_levels: np.ndarray,
    cfg: MatchConfig,
    ref_ids: Sequence[str] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Score one query against a matrix of reference level rows.

    Returns (scores, ubc_passes, lbc_passes, num_subsets), one entry per
    reference row.  ref_ids is required when cfg.noise is set; noise
    draws bind to the reference id, not the row position.
    """
    q = np.asarray(q_levels)
    refs = np.atleast_2d(np.asarray(ref_levels))
    if refs.shape[1] != q.size:
        raise ValueError(f"length mismatch: query {q.size}, references {refs.shape[1]}")

    length = q.size
    m = cfg.m
    num_subsets = _num_subsets(length, m)
    padded = num_subsets * m

    if cfg.noise is None:
        ub = np.full(padded, np.inf)
        lb = np.full(padded, np.inf)
        ub[:length] = q + cfg.alpha_pos
        lb[:length] = q - cfg.alpha_neg
        values = np.zeros((refs.shape[0], padded), dtype=refs.dtype)
        values[:, :length] = refs
    else:
        if ref_ids is None:
            raise ValueError("ref_ids required when scoring with noise")
        if len(ref_ids) != refs.shape[0]:
            raise ValueError(f"expected {refs.shape[0]} ref_ids, got {len(ref_ids)}")
        scale = cfg.noise.memory_window / cfg.n
        ub = np.full(padded, np.inf)
        lb = np.full(padded, np.inf)
        ub[:length] = (q + cfg.alpha_pos) * scale
        lb[:length] = (q - cfg.alpha_neg) * scale
        values = np.zeros((refs.shape[0], padded))
        values[:, :length] = refs * scale
        for row, rid in enumerate(ref_ids):
            values[row, :length] += noise_voltages(cfg.noise, rid, length)

    # padding passes the all-of upper check and fails the any-of lower check
    ubc = (values <= ub).reshape(-1, num_subsets, m).all(axis=2)
    lbc = (values >= lb).reshape(-1, num_subsets, m).any(axis=2)
    ubc_passes = ubc.sum(axis=1, dtype=np.int64)
    lbc_passes = lbc.sum(axis=1, dtype=np.int64)
    return ubc_passes + lbc_passes, ubc_passes, lbc_passes, num_subsets


def dual_bound_score(
    q: PackedVector, r: PackedVector, cfg: MatchConfig, ref_id: str = ""
) -> ScoreResult:
    """Score one query/reference pair of packed vectors."""
    if q.n != r.n:
        raise ValueError(f"packing factor mismatch: query {q.n}, reference {r.n}")
    if q.n != cfg.n:
        raise ValueError(f"config n ({cfg.n}) does not match vectors ({q.n})")
    if q.levels.size != r.levels.size:
        raise ValueError(
            f"length mismatch: query {q.levels.size}, reference {r.levels.size}"
        )
    scores, ubc, lbc, num_subsets = score_matrix(
        q.levels, r.levels[None, :], cfg, ref_ids=[ref_id]
    )
    return ScoreResult(int(scores[0]), int(ubc[0]), int(lbc[0]), num_subsets)
