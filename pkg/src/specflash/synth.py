"""Synthetic benchmark data: random binned spectra plus perturbed queries.

References are random sparse (bin, level) spectra.  Queries are derived
from references by dropping peaks, adding spurious peaks, and jittering
intensity levels, which stands in for modified-peptide spectra at desk
scale.  Everything is deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import BinnedSpectrum
from .streams import stream

__all__ = ["SynthConfig", "make_reference_spectra", "make_query_spectra"]


@dataclass(frozen=True)
class SynthConfig:
    library_size: int = 1000
    num_queries: int = 50
    num_bins: int = 1400
    num_levels: int = 64
    min_peaks: int = 30
    max_peaks: int = 50
    drop_rate: float = 0.15
    add_rate: float = 0.10
    level_jitter: float = 0.30

    def __post_init__(self):
        if self.library_size < 1:
            raise ValueError("library_size must be >= 1")
        if self.num_queries < 0:
            raise ValueError("num_queries must be >= 0")
        if self.num_bins < 1 or self.num_levels < 2:
            raise ValueError("num_bins must be >= 1 and num_levels >= 2")
        if not 1 <= self.min_peaks <= self.max_peaks <= self.num_bins:
            raise ValueError("need 1 <= min_peaks <= max_peaks <= num_bins")
        if not 0 <= self.drop_rate < 1:
            raise ValueError("drop_rate must be in [0, 1)")
        if self.add_rate < 0 or not 0 <= self.level_jitter <= 1:
            raise ValueError("add_rate must be >= 0 and level_jitter in [0, 1]")


def make_reference_spectra(cfg: SynthConfig, seed: int) -> list[BinnedSpectrum]:
    refs = []
    for r in range(cfg.library_size):
        rng = stream(seed, "synth-ref", r)
        npeaks = int(rng.integers(cfg.min_peaks, cfg.max_peaks + 1))
        bins = np.sort(rng.choice(cfg.num_bins, size=npeaks, replace=False))
        levels = rng.integers(0, cfg.num_levels, size=npeaks)
        entries = [(int(i), int(j)) for i, j in zip(bins, levels)]
        refs.append(BinnedSpectrum(f"ref-{r:05d}", entries, cfg.num_bins))
    return refs


def make_query_spectra(
    refs: list[BinnedSpectrum], cfg: SynthConfig, seed: int
) -> list[BinnedSpectrum]:
    """Perturbed copies of round-robin-chosen references."""
    queries = []
    for qi in range(cfg.num_queries):
        src = refs[qi % len(refs)]
        rng = stream(seed, "synth-query", qi)

        keep = rng.random(len(src.entries)) >= cfg.drop_rate
        if not keep.any():
            keep[0] = True
        entries = {i: j for (i, j), k in zip(src.entries, keep) if k}

        jitter_mask = rng.random(len(entries)) < cfg.level_jitter
        deltas = rng.choice((-1, 1), size=len(entries))
        for (i, j), hit, delta in zip(list(entries.items()), jitter_mask, deltas):
            if hit:
                entries[i] = int(np.clip(j + delta, 0, cfg.num_levels - 1))

        n_add = int(round(cfg.add_rate * len(src.entries)))
        if n_add:
            for candidate in rng.permutation(cfg.num_bins):
                if n_add == 0:
                    break
                if int(candidate) not in entries:
                    entries[int(candidate)] = int(rng.integers(0, cfg.num_levels))
                    n_add -= 1

        queries.append(BinnedSpectrum(f"query-{qi:05d}", sorted(entries.items()), cfg.num_bins))
    return queries
