"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as the
criteria execute.  Expected values come from exact formulas, independent
brute-force evaluators, and the exact Hamming oracle; tolerances are
stated inline and are zero wherever the contract is exact.
"""

import math

import numpy as np
import pytest

from specflash.array_model import (
    count_reads_dual_bound,
    count_reads_mlc_baseline,
    read_speedup,
)
from specflash.cli import main
from specflash.hdc import HdcParams, generate_item_memory, normalized_hamming, encode
from specflash.matching import MatchConfig, NoiseModel, dual_bound_score
from specflash.packing import PackedVector
from specflash.pipeline import build_library, evaluate, search
from specflash.spectra import BinnedSpectrum
from specflash.synth import SynthConfig, make_query_spectra, make_reference_spectra

DIM = 8192


def _ok(num: int, text: str) -> None:
    print(f"\n[criterion {num}] PASS - {text}")


def test_criterion_1_read_ratio_formula_exact():
    """Measured sensing-read ratio equals m*(2^n - 1)/2, zero tolerance."""
    checked = 0
    for m in (1, 2, 4, 8, 16):
        for n in (1, 2, 3, 4):
            if DIM % (m * n):
                continue
            measured = count_reads_mlc_baseline(DIM, n).sensing_reads / \
                count_reads_dual_bound(DIM, n, m).sensing_reads
            assert measured == read_speedup(m, n) == m * (2**n - 1) / 2
            checked += 1
    assert read_speedup(4, 3) == 14.0
    assert read_speedup(4, 4) == 30.0
    _ok(1, f"read-ratio formula exact on {checked} divisible (m, n) pairs; "
           "(4,3)=14 and (4,4)=30")


def test_criterion_2_oracle_rank_equivalence():
    """Top-10 at n=1, m=1, alpha=0.5 identical to exact Hamming ranking."""
    params = HdcParams(dimension=DIM, num_ids=1400, num_levels=64, seed=101)
    synth = SynthConfig(library_size=1000, num_queries=1)
    cfg = MatchConfig(0.5, 0.5, m=1, n=1)
    for trial in range(50):
        refs = make_reference_spectra(synth, 1000 + trial)
        queries = make_query_spectra(refs, synth, 1000 + trial)
        lib = build_library(refs, params, 1)
        report = search(queries[0], lib, cfg, k=10, with_oracle=True)
        dual_top = [rid for rid, _ in report.ranked]
        oracle_top = [rid for rid, _ in report.oracle_ranked[:10]]
        assert dual_top == oracle_top, f"trial {trial}: rankings diverge"
        # shared monotone mapping: score = D + similarity
        for (rid, score), (_, sim) in zip(report.ranked, report.oracle_ranked):
            assert score == DIM + sim
    _ok(2, "top-10 identical to the exact Hamming oracle on 50 seeded "
           "1000-reference trials")


def test_criterion_3_closed_form_score_identity():
    """m=1, 0<alpha<1: score = num_subsets + #{i: r_i == q_i}, zero tolerance."""
    rng = np.random.default_rng(31)
    for _ in range(10_000):
        n = int(rng.integers(1, 6))
        length = int(rng.integers(2, 49))
        q = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        r = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        alpha = float(rng.uniform(0.01, 0.99))
        res = dual_bound_score(
            PackedVector(n, q), PackedVector(n, r), MatchConfig(alpha, alpha, m=1, n=n)
        )
        # independent brute-force per-dimension evaluation
        brute_ubc = sum(int(rv <= qv + alpha) for qv, rv in zip(q, r))
        brute_lbc = sum(int(rv >= qv - alpha) for qv, rv in zip(q, r))
        assert res.score == brute_ubc + brute_lbc
        assert res.score == length + int((q == r).sum())
        assert res.num_subsets == length
    _ok(3, "closed-form m=1 score identity verified against brute force on "
           "10,000 random pairs")


def test_criterion_4_accuracy_retention_vs_baseline():
    """recall@1 at (n=3, m=8, a=1.5) >= 0.90 x recall@1 of (n=1, m=1)."""
    params = HdcParams(dimension=DIM, num_ids=1400, num_levels=64, seed=640)
    synth = SynthConfig(library_size=1000, num_queries=50)
    base_cfg = MatchConfig(0.5, 0.5, m=1, n=1)
    test_cfg = MatchConfig(1.5, 1.5, m=8, n=3)
    base_recalls, test_recalls = [], []
    for seed in range(10):
        refs = make_reference_spectra(synth, 4000 + seed)
        queries = make_query_spectra(refs, synth, 4000 + seed)
        base_lib = build_library(refs, params, 1)
        test_lib = build_library(refs, params, 3)
        base_recalls.append(evaluate(queries, base_lib, base_cfg, k=10).recall_at_1)
        test_recalls.append(evaluate(queries, test_lib, test_cfg, k=10).recall_at_1)
    base = sum(base_recalls) / len(base_recalls)
    achieved = sum(test_recalls) / len(test_recalls)
    assert achieved >= 0.90 * base, f"retention {achieved:.3f} < 0.90 x {base:.3f}"
    _ok(4, f"recall@1 retention {achieved:.3f} vs baseline {base:.3f} "
           f"({achieved / base:.1%}) over 10 seeds")


def test_criterion_5_monotonicity_bounds_coarsening():
    """Score monotone in both tolerances, bounded, and exactly AND/OR-coarsened."""
    rng = np.random.default_rng(55)
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 9))
        length = int(rng.integers(1, 41))
        q = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        r = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        lo = float(rng.uniform(0.0, 2.0))
        hi = lo + float(rng.uniform(0.0, 2.0))
        qv, rv = PackedVector(n, q), PackedVector(n, r)
        base = dual_bound_score(qv, rv, MatchConfig(lo, lo, m=m, n=n))
        up_pos = dual_bound_score(qv, rv, MatchConfig(hi, lo, m=m, n=n))
        up_neg = dual_bound_score(qv, rv, MatchConfig(lo, hi, m=m, n=n))
        assert up_pos.score >= base.score
        assert up_neg.score >= base.score
        for res in (base, up_pos, up_neg):
            assert 0 <= res.score <= 2 * res.num_subsets

    # coarsening identity: subset checks equal AND/OR of per-element checks
    for _ in range(2_000):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 9))
        length = int(rng.integers(1, 33))
        q = rng.integers(0, n + 1, size=length)
        r = rng.integers(0, n + 1, size=length)
        a_pos = float(rng.uniform(0.0, 2.5))
        a_neg = float(rng.uniform(0.0, 2.5))
        res = dual_bound_score(
            PackedVector(n, q), PackedVector(n, r), MatchConfig(a_pos, a_neg, m=m, n=n)
        )
        ubc = lbc = 0
        for j in range(res.num_subsets):
            idx = range(j * m, min((j + 1) * m, length))
            ubc += int(all(r[i] <= q[i] + a_pos for i in idx))
            lbc += int(any(r[i] >= q[i] - a_neg for i in idx))
        assert (res.ubc_passes, res.lbc_passes) == (ubc, lbc)
    _ok(5, "monotonicity and bounds on 10,000 triples; AND/OR coarsening exact "
           "on 2,000 triples")


def test_criterion_6_noise_robustness_at_device_parameters():
    """sigma=0.2 V, MW=6.5 V, n=3, alpha=1.5: noisy top-1 matches noiseless >= 99%."""
    params = HdcParams(dimension=DIM, num_ids=1400, num_levels=64, seed=606)
    synth = SynthConfig(library_size=100, num_queries=1000)
    refs = make_reference_spectra(synth, 66)
    queries = make_query_spectra(refs, synth, 66)
    lib = build_library(refs, params, 3)
    clean_cfg = MatchConfig(1.5, 1.5, m=1, n=3)
    agree = 0
    for trial, query in enumerate(queries):
        noisy_cfg = MatchConfig(
            1.5, 1.5, m=1, n=3, noise=NoiseModel(sigma_vt=0.2, memory_window=6.5, seed=trial)
        )
        clean_top = search(query, lib, clean_cfg, k=1).ranked[0][0]
        noisy_top = search(query, lib, noisy_cfg, k=1).ranked[0][0]
        agree += int(clean_top == noisy_top)
    assert agree >= 990, f"only {agree}/1000 noisy trials matched the noiseless top-1"
    _ok(6, f"noisy top-1 agreement {agree}/1000 at sigma=0.2 V, MW=6.5 V")


def test_criterion_7_determinism_and_parallel_merge(tmp_path):
    """Same seed and any thread count produce byte-identical result files."""
    synth = "library_size=300,num_queries=12,num_bins=500,min_peaks=20,max_peaks=35"
    assert main(["build", "--synth", synth, "--seed", "9", "--pf", "3",
                 "--out", str(tmp_path / "lib")]) == 0

    outputs = {}
    for tag, threads in [("t1", 1), ("t1b", 1), ("t4", 4), ("t8", 8)]:
        code = main([
            "search", str(tmp_path / "lib"), str(tmp_path / "lib.queries.json"),
            "--threads", str(threads), "--oracle", "--k", "10",
            "--out", str(tmp_path / f"res_{tag}"),
        ])
        assert code == 0
        outputs[tag] = (
            (tmp_path / f"res_{tag}.csv").read_bytes(),
            (tmp_path / f"res_{tag}.json").read_bytes(),
        )
    assert outputs["t1"] == outputs["t1b"], "repeat run differs"
    assert outputs["t1"] == outputs["t4"], "4-thread run differs"
    assert outputs["t1"] == outputs["t8"], "8-thread run differs"

    for tag in ("s1", "s2"):
        assert main(["sweep", "--synth", "library_size=40,num_queries=6,num_bins=300",
                     "--seed", "11", "--out", str(tmp_path / f"sw_{tag}")]) == 0
    assert (tmp_path / "sw_s1.csv").read_bytes() == (tmp_path / "sw_s2.csv").read_bytes()
    _ok(7, "byte-identical outputs across repeat runs and thread counts {1, 4, 8}")


def test_criterion_8_hypervector_algebra():
    """Quasi-orthogonality and bundling similarity hold in >= 95/100 trials."""
    ortho_hits = bundle_hits = 0
    for seed in range(100):
        p = HdcParams(dimension=DIM, num_ids=8, num_levels=4, seed=seed)
        mem = generate_item_memory(p)
        if 0.45 <= normalized_hamming(mem.id_hv(0), mem.id_hv(1)) <= 0.55:
            ortho_hits += 1
        bundle = encode(BinnedSpectrum("s", [(0, 0), (1, 1), (2, 2)], 8), mem)
        parts = [mem.id_hv(i) ^ mem.level_hv(i) for i in range(3)]
        unrelated = mem.id_hv(5) ^ mem.level_hv(3)
        ok = all(normalized_hamming(bundle, part) < 0.4 for part in parts)
        ok = ok and 0.45 <= normalized_hamming(bundle, unrelated) <= 0.55
        bundle_hits += int(ok)
    assert ortho_hits >= 95, f"quasi-orthogonality held in only {ortho_hits}/100 trials"
    assert bundle_hits >= 95, f"bundling similarity held in only {bundle_hits}/100 trials"
    _ok(8, f"quasi-orthogonality {ortho_hits}/100, bundling similarity "
           f"{bundle_hits}/100 at D = {DIM}")
