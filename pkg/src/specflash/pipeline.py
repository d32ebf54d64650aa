"""End-to-end library build and query search.

Orchestrates encode -> pack -> score: builds packed libraries from
binned spectra, runs the dual-bound search against every reference,
ranks top-k with a deterministic tie-break, and evaluates retrieval
quality against the exact Hamming oracle.
"""

from __future__ import annotations

import csv
import functools
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .array_model import OpCounters, count_reads_dual_bound, count_reads_mlc_baseline, read_speedup
from .fileio import atomic_write_text
from .hdc import HdcParams, Hypervector, ItemMemory, encode, generate_item_memory
from .matching import MatchConfig, score_matrix
from .packing import PackedVector, pack_bit_rows, read_packed_library, write_packed_library
from .spectra import BinnedSpectrum
from .synth import SynthConfig, make_query_spectra, make_reference_spectra

__all__ = [
    "Library",
    "SearchReport",
    "EvalSummary",
    "SweepRow",
    "build_library",
    "encode_spectra",
    "search",
    "exact_hamming",
    "evaluate",
    "sweep_grid",
    "sweep",
    "save_library",
    "load_library",
    "search_reports_to_csv",
    "search_reports_to_json",
    "sweep_rows_to_csv",
    "sweep_rows_to_heatmap_json",
]

_SCORE_CHUNK = 256  # references per scoring task; fixed so results never depend on thread count


@functools.lru_cache(maxsize=8)
def _cached_item_memory(params: HdcParams) -> ItemMemory:
    return generate_item_memory(params)


@dataclass
class Library:
    """Packed reference store plus the parameters needed to encode queries."""

    params: HdcParams
    pack_n: int
    ids: list[str]
    levels: np.ndarray                  # (size, ceil(D/n)) uint8
    raw_rows: np.ndarray | None = None  # (size, D/8) packed bits, oracle support

    @property
    def size(self) -> int:
        return len(self.ids)

    def reference(self, idx: int) -> tuple[str, PackedVector]:
        return self.ids[idx], PackedVector(self.pack_n, self.levels[idx])

    @property
    def references(self) -> list[tuple[str, PackedVector]]:
        return [self.reference(i) for i in range(self.size)]

    def raw_hv(self, idx: int) -> Hypervector:
        if self.raw_rows is None:
            raise ValueError("library was built without raw hypervectors")
        return Hypervector(self.params.dimension, self.raw_rows[idx])


@dataclass
class SearchReport:
    query_id: str
    k: int
    ranked: list[tuple[str, int]]
    counters: OpCounters
    # full oracle ranking over the library (not truncated to k)
    oracle_ranked: list[tuple[str, int]] | None = None


@dataclass(frozen=True)
class EvalSummary:
    recall_at_1: float
    recall_at_k: float
    identification_count: int
    total_queries: int


def encode_spectra(
    spectra: Sequence[BinnedSpectrum], mem: ItemMemory
) -> tuple[list[str], np.ndarray]:
    """Encode spectra into a matrix of packed-bit rows; ids must be unique."""
    if not spectra:
        raise ValueError("no spectra to encode")
    ids: list[str] = []
    seen: set[str] = set()
    rows = np.empty((len(spectra), mem.params.row_bytes), dtype=np.uint8)
    for idx, b in enumerate(spectra):
        if b.id in seen:
            raise ValueError(f"duplicate spectrum id {b.id!r}")
        seen.add(b.id)
        try:
            rows[idx] = encode(b, mem).packed
        except ValueError as exc:
            raise ValueError(f"spectrum {b.id!r}: {exc}") from exc
        ids.append(b.id)
    return ids, rows


def build_library(
    spectra: Sequence[BinnedSpectrum],
    params: HdcParams,
    n: int,
    keep_raw: bool = True,
) -> Library:
    """Encode then pack every spectrum; deterministic for a fixed seed."""
    mem = _cached_item_memory(params)
    ids, rows = encode_spectra(spectra, mem)
    levels = pack_bit_rows(rows, params.dimension, n)
    return Library(params, n, ids, levels, rows if keep_raw else None)


def _rank(ids: Sequence[str], scores: np.ndarray, k: int) -> list[tuple[str, int]]:
    """Descending score, ties broken by ascending reference id."""
    order = sorted(range(len(ids)), key=lambda i: (-int(scores[i]), ids[i]))
    return [(ids[i], int(scores[i])) for i in order[: min(k, len(ids))]]


def _score_library(
    q_levels: np.ndarray, lib: Library, cfg: MatchConfig, threads: int
) -> np.ndarray:
    chunks = range(0, lib.size, _SCORE_CHUNK)

    def run(start: int) -> np.ndarray:
        stop = min(start + _SCORE_CHUNK, lib.size)
        scores, _, _, _ = score_matrix(
            q_levels, lib.levels[start:stop], cfg, ref_ids=lib.ids[start:stop]
        )
        return scores

    if threads > 1 and lib.size > _SCORE_CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(start) for start in chunks]
    return np.concatenate(parts)


def search(
    query: BinnedSpectrum,
    lib: Library,
    cfg: MatchConfig,
    k: int,
    threads: int = 1,
    with_oracle: bool = False,
) -> SearchReport:
    """Dual-bound score against every reference, then top-k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if cfg.n != lib.pack_n:
        raise ValueError(f"config n ({cfg.n}) does not match library packing ({lib.pack_n})")
    if query.num_bins != lib.params.num_ids:
        raise ValueError(
            f"query has {query.num_bins} bins but the library encodes {lib.params.num_ids}"
        )
    mem = _cached_item_memory(lib.params)
    query_hv = encode(query, mem)
    q_levels = pack_bit_rows(query_hv.packed[None, :], lib.params.dimension, cfg.n)[0]

    scores = _score_library(q_levels, lib, cfg, threads)
    counters = count_reads_dual_bound(lib.params.dimension, cfg.n, cfg.m).scaled(lib.size)

    oracle_ranked = None
    if with_oracle:
        sims = _hamming_similarities(query_hv, lib)
        oracle_ranked = _rank(lib.ids, sims, lib.size)
    return SearchReport(query.id, k, _rank(lib.ids, scores, k), counters, oracle_ranked)


def _hamming_similarities(query_hv: Hypervector, lib: Library) -> np.ndarray:
    if lib.raw_rows is None:
        raise ValueError("library was built without raw hypervectors; oracle unavailable")
    distances = np.bitwise_count(lib.raw_rows ^ query_hv.packed).sum(axis=1, dtype=np.int64)
    return lib.params.dimension - distances


def exact_hamming(query_hv: Hypervector, lib: Library) -> list[tuple[str, int]]:
    """Ground-truth similarities (D - Hamming) in library order."""
    sims = _hamming_similarities(query_hv, lib)
    return list(zip(lib.ids, (int(s) for s in sims)))


def evaluate(
    queries: Sequence[BinnedSpectrum],
    lib: Library,
    cfg: MatchConfig,
    k: int,
    threads: int = 1,
) -> EvalSummary:
    """Top-1 / top-k agreement between the dual-bound search and the oracle."""
    if not queries:
        raise ValueError("no queries to evaluate")
    if lib.raw_rows is None:
        raise ValueError("evaluation needs a library with raw hypervectors")
    top1_hits = 0
    topk_hits = 0
    for query in queries:
        report = search(query, lib, cfg, k, threads=threads, with_oracle=True)
        oracle_top1 = report.oracle_ranked[0][0]
        if report.ranked[0][0] == oracle_top1:
            top1_hits += 1
        if any(rid == oracle_top1 for rid, _ in report.ranked):
            topk_hits += 1
    total = len(queries)
    return EvalSummary(top1_hits / total, topk_hits / total, top1_hits, total)


# ------------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepRow:
    alpha: float
    m: int
    n: int
    trials: int
    queries_per_trial: int
    recall_at_1: float
    recall_at_k: float
    identifications: float
    reads_per_query: int
    mlc_reads_per_query: int
    read_ratio: float
    speedup_formula: float


def sweep_grid(
    refs: Sequence[BinnedSpectrum],
    queries: Sequence[BinnedSpectrum],
    params: HdcParams,
    alphas: Sequence[float],
    ms: Sequence[int],
    ns: Sequence[int],
    k: int,
    noise=None,
    threads: int = 1,
) -> list[EvalSummary]:
    """Evaluate one dataset over the full (alpha, m, n) grid.

    Returns summaries in (n, alpha, m) iteration order; packing is redone
    per n from hypervectors encoded once.
    """
    if not alphas or not ms or not ns:
        raise ValueError("sweep grid must not be empty")
    mem = _cached_item_memory(params)
    ids, rows = encode_spectra(refs, mem)
    out = []
    for n in ns:
        lib = Library(params, n, ids, pack_bit_rows(rows, params.dimension, n), rows)
        for alpha in alphas:
            for m in ms:
                cfg = MatchConfig(alpha_pos=alpha, alpha_neg=alpha, m=m, n=n, noise=noise)
                out.append(evaluate(queries, lib, cfg, k, threads=threads))
    return out


def sweep(
    alphas: Sequence[float],
    ms: Sequence[int],
    ns: Sequence[int],
    params: HdcParams,
    synth_cfg: SynthConfig,
    k: int,
    trials: int = 1,
    seed: int = 0,
    noise=None,
    threads: int = 1,
) -> list[SweepRow]:
    """Full Cartesian sweep on `trials` regenerated synthetic datasets.

    Emits one row per (alpha, m, n) with recall and read counters
    averaged over trials, plus the formula speedup for that (m, n).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    grids: list[list[EvalSummary]] = []
    for t in range(trials):
        refs = make_reference_spectra(synth_cfg, seed + t)
        queries = make_query_spectra(refs, synth_cfg, seed + t)
        grids.append(
            sweep_grid(refs, queries, params, alphas, ms, ns, k, noise=noise, threads=threads)
        )

    rows = []
    idx = 0
    for n in ns:
        for alpha in alphas:
            for m in ms:
                summaries = [g[idx] for g in grids]
                idx += 1
                dual = count_reads_dual_bound(params.dimension, n, m)
                mlc = count_reads_mlc_baseline(params.dimension, n)
                rows.append(
                    SweepRow(
                        alpha=alpha,
                        m=m,
                        n=n,
                        trials=trials,
                        queries_per_trial=summaries[0].total_queries,
                        recall_at_1=sum(s.recall_at_1 for s in summaries) / trials,
                        recall_at_k=sum(s.recall_at_k for s in summaries) / trials,
                        identifications=sum(s.identification_count for s in summaries) / trials,
                        reads_per_query=dual.sensing_reads * synth_cfg.library_size,
                        mlc_reads_per_query=mlc.sensing_reads * synth_cfg.library_size,
                        read_ratio=mlc.sensing_reads / dual.sensing_reads,
                        speedup_formula=read_speedup(m, n),
                    )
                )
    return rows


# ------------------------------------------------------------- persistence
#
# A library on disk is three files sharing a base path:
#   <base>.pack       packed level rows (packing module binary format)
#   <base>.meta.json  reference ids + encoding parameters
#   <base>.hvs        optional raw hypervector rows (hdc dump format)

LIBRARY_META_VERSION = 1


def save_library(lib: Library, base: str | Path) -> dict:
    """Write the library files; returns the paths written."""
    base = Path(base)
    pack_path = base.with_name(base.name + ".pack")
    meta_path = base.with_name(base.name + ".meta.json")
    write_packed_library(pack_path, lib.params.dimension, lib.pack_n, lib.levels)
    meta = {
        "format_version": LIBRARY_META_VERSION,
        "hdc": {
            "dimension": lib.params.dimension,
            "num_ids": lib.params.num_ids,
            "num_levels": lib.params.num_levels,
            "seed": lib.params.seed,
        },
        "pack_n": lib.pack_n,
        "ids": lib.ids,
        "has_raw": lib.raw_rows is not None,
    }
    atomic_write_text(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    paths = {"pack": pack_path, "meta": meta_path}
    if lib.raw_rows is not None:
        from .hdc import save_hv_rows

        hv_path = base.with_name(base.name + ".hvs")
        save_hv_rows(hv_path, lib.params, lib.raw_rows)
        paths["hvs"] = hv_path
    return paths


def load_library(base: str | Path) -> Library:
    base = Path(base)
    meta_path = base.with_name(base.name + ".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format_version") != LIBRARY_META_VERSION:
        raise ValueError(f"{meta_path}: unsupported library format version")
    params = HdcParams(**meta["hdc"])
    dim, n, levels = read_packed_library(base.with_name(base.name + ".pack"))
    if dim != params.dimension or n != meta["pack_n"]:
        raise ValueError(f"{base}: packed file does not match metadata")
    ids = list(meta["ids"])
    if len(ids) != levels.shape[0]:
        raise ValueError(f"{base}: {len(ids)} ids but {levels.shape[0]} packed rows")
    raw_rows = None
    if meta.get("has_raw"):
        from .hdc import load_hv_rows

        hv_params, raw_rows = load_hv_rows(base.with_name(base.name + ".hvs"))
        if hv_params != params or raw_rows.shape[0] != len(ids):
            raise ValueError(f"{base}: raw hypervector sidecar does not match metadata")
    return Library(params, n, ids, levels, raw_rows)


# ------------------------------------------------------------ serialization

def search_reports_to_csv(reports: Sequence[SearchReport], oracle: bool = False) -> str:
    """CSV rows: query_id, rank, reference_id, score [+ oracle columns]."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["query_id", "rank", "reference_id", "score"]
    if oracle:
        header += ["oracle_similarity", "oracle_rank", "agree"]
    writer.writerow(header)
    for report in reports:
        oracle_info = {}
        if oracle:
            if report.oracle_ranked is None:
                raise ValueError(f"query {report.query_id!r}: report has no oracle ranking")
            oracle_info = {
                rid: (rank, sim)
                for rank, (rid, sim) in enumerate(report.oracle_ranked, start=1)
            }
        for rank, (rid, score) in enumerate(report.ranked, start=1):
            row = [report.query_id, rank, rid, score]
            if oracle:
                orank, osim = oracle_info.get(rid, ("", ""))
                row += [osim, orank, int(orank == rank) if orank != "" else 0]
            writer.writerow(row)
    return buf.getvalue()


def search_reports_to_json(reports: Sequence[SearchReport]) -> str:
    objs = []
    for report in reports:
        obj = {
            "query_id": report.query_id,
            "k": report.k,
            "ranked": [{"reference_id": rid, "score": score} for rid, score in report.ranked],
            "counters": {
                "sensing_reads": report.counters.sensing_reads,
                "wordline_activations": report.counters.wordline_activations,
                "subsets_evaluated": report.counters.subsets_evaluated,
            },
        }
        if report.oracle_ranked is not None:
            obj["oracle_ranked"] = [
                {"reference_id": rid, "similarity": sim}
                for rid, sim in report.oracle_ranked[: report.k]
            ]
        objs.append(obj)
    return json.dumps(objs, indent=2, sort_keys=True) + "\n"


def sweep_rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "alpha", "m", "n", "trials", "queries_per_trial",
            "recall_at_1", "recall_at_k", "identifications",
            "reads_per_query", "mlc_reads_per_query", "read_ratio", "speedup_formula",
        ]
    )
    for r in rows:
        writer.writerow(
            [
                r.alpha, r.m, r.n, r.trials, r.queries_per_trial,
                f"{r.recall_at_1:.6f}", f"{r.recall_at_k:.6f}", f"{r.identifications:.2f}",
                r.reads_per_query, r.mlc_reads_per_query,
                f"{r.read_ratio:.6f}", f"{r.speedup_formula:.6f}",
            ]
        )
    return buf.getvalue()


def sweep_rows_to_heatmap_json(rows: Sequence[SweepRow]) -> str:
    """Alpha x m grids per packing factor, for external plotting tools."""
    ns = sorted({r.n for r in rows})
    alphas = sorted({r.alpha for r in rows})
    ms = sorted({r.m for r in rows})
    by_key = {(r.n, r.alpha, r.m): r for r in rows}
    grids = {}
    for n in ns:
        grids[str(n)] = {
            "identifications": [
                [by_key[(n, a, m)].identifications for m in ms] for a in alphas
            ],
            "recall_at_1": [
                [by_key[(n, a, m)].recall_at_1 for m in ms] for a in alphas
            ],
        }
    obj = {"alphas": alphas, "ms": ms, "ns": ns, "grids": grids}
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
