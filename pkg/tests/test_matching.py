import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specflash.hdc import HdcParams, encode, generate_item_memory, hamming
from specflash.matching import (
    MatchConfig,
    NoiseModel,
    dual_bound_score,
    level_to_voltage,
    lower_bound_check,
    noise_voltages,
    score_matrix,
    upper_bound_check,
)
from specflash.packing import PackedVector, pack
from specflash.spectra import BinnedSpectrum


def oracle_score(q, r, m, alpha_pos, alpha_neg):
    """Brute-force per-dimension evaluation, independent of the engine."""
    length = len(q)
    subsets = math.ceil(length / m)
    ubc = lbc = 0
    for j in range(subsets):
        idx = range(j * m, min((j + 1) * m, length))
        if all(r[i] <= q[i] + alpha_pos for i in idx):
            ubc += 1
        if any(r[i] >= q[i] - alpha_neg for i in idx):
            lbc += 1
    return ubc + lbc, ubc, lbc, subsets


def pv(levels, n):
    return PackedVector(n, np.asarray(levels, dtype=np.uint8))


def test_level_to_voltage_endpoints_and_interior():
    assert level_to_voltage(0, 3, 6.5) == 0.0
    assert level_to_voltage(3, 3, 6.5) == 6.5
    assert level_to_voltage(2, 3, 6.5) == pytest.approx(13.0 / 3.0)
    with pytest.raises(ValueError):
        level_to_voltage(4, 3, 6.5)
    with pytest.raises(ValueError):
        level_to_voltage(-1, 3, 6.5)


def test_upper_bound_check_examples():
    assert upper_bound_check([2, 1, 3, 0], [2, 2, 3, 0], 1.5) == 1
    assert upper_bound_check([0, 0], [2, 0], 1.5) == 0  # 2 > 0 + 1.5
    assert upper_bound_check([1, 1], [1, 1], 0.0) == 1  # equality passes
    with pytest.raises(ValueError):
        upper_bound_check([1, 2], [1], 1.0)


def test_lower_bound_check_examples():
    assert lower_bound_check([3, 3], [0, 1], 1.5) == 0  # both strictly below q - 1.5
    assert lower_bound_check([3, 0], [0, 0], 1.5) == 1  # 0 >= 0 - 1.5
    assert lower_bound_check([2, 2], [2, 2], 0.0) == 1  # r == q passes any alpha >= 0
    with pytest.raises(ValueError):
        lower_bound_check([1], [1, 2], 1.0)


def test_self_match_saturates_score():
    q = pv([2, 1, 3, 0, 2, 2], 3)
    for alpha in (0.0, 0.5, 1.5):
        res = dual_bound_score(q, q, MatchConfig(alpha_pos=alpha, alpha_neg=alpha, m=1, n=3))
        assert res.score == 2 * res.num_subsets == 12
        assert res.ubc_passes == res.lbc_passes == 6


def test_m1_closed_form_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        length = int(rng.integers(4, 40))
        q = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        r = rng.integers(0, n + 1, size=length, dtype=np.uint8)
        alpha = float(rng.uniform(0.01, 0.99))
        res = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(alpha, alpha, m=1, n=n))
        assert res.score == length + int((q == r).sum())
        assert (res.score, res.ubc_passes, res.lbc_passes, res.num_subsets) == \
            oracle_score(q, r, 1, alpha, alpha)


def test_n1_m1_score_is_hamming_similarity():
    # exact relation: score = D + (D - Hamming) for bit vectors
    params = HdcParams(dimension=512, num_ids=24, num_levels=8, seed=2)
    mem = generate_item_memory(params)
    a = encode(BinnedSpectrum("a", [(0, 1), (3, 2), (9, 7)], 24), mem)
    b = encode(BinnedSpectrum("b", [(1, 1), (3, 3), (11, 0)], 24), mem)
    res = dual_bound_score(pack(a, 1), pack(b, 1), MatchConfig(0.5, 0.5, m=1, n=1))
    assert res.score == 512 + (512 - hamming(a, b))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_score_matches_oracle_for_any_m(data):
    n = data.draw(st.integers(1, 5))
    length = data.draw(st.integers(1, 40))
    m = data.draw(st.integers(1, 12))
    q = data.draw(st.lists(st.integers(0, n), min_size=length, max_size=length))
    r = data.draw(st.lists(st.integers(0, n), min_size=length, max_size=length))
    a_pos = data.draw(st.floats(0.0, 3.0, allow_nan=False))
    a_neg = data.draw(st.floats(0.0, 3.0, allow_nan=False))
    res = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(a_pos, a_neg, m=m, n=n))
    exp_score, exp_ubc, exp_lbc, exp_subsets = oracle_score(q, r, m, a_pos, a_neg)
    assert (res.score, res.ubc_passes, res.lbc_passes, res.num_subsets) == \
        (exp_score, exp_ubc, exp_lbc, exp_subsets)
    assert 0 <= res.score <= 2 * res.num_subsets


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_score_monotone_in_tolerances(data):
    n = data.draw(st.integers(1, 4))
    length = data.draw(st.integers(1, 30))
    m = data.draw(st.integers(1, 6))
    q = data.draw(st.lists(st.integers(0, n), min_size=length, max_size=length))
    r = data.draw(st.lists(st.integers(0, n), min_size=length, max_size=length))
    lo = data.draw(st.floats(0.0, 2.0, allow_nan=False))
    hi = lo + data.draw(st.floats(0.0, 2.0, allow_nan=False))
    base = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(lo, lo, m=m, n=n)).score
    up_pos = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(hi, lo, m=m, n=n)).score
    up_neg = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(lo, hi, m=m, n=n)).score
    assert up_pos >= base
    assert up_neg >= base


def test_subset_coarsening_is_and_or_of_singles():
    rng = np.random.default_rng(9)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 7))
        length = int(rng.integers(1, 30))
        q = rng.integers(0, n + 1, size=length)
        r = rng.integers(0, n + 1, size=length)
        a_pos = float(rng.uniform(0, 2.5))
        a_neg = float(rng.uniform(0, 2.5))
        res = dual_bound_score(pv(q, n), pv(r, n), MatchConfig(a_pos, a_neg, m=m, n=n))
        ubc = lbc = 0
        for j in range(res.num_subsets):
            idx = range(j * m, min((j + 1) * m, length))
            singles_u = [upper_bound_check([q[i]], [r[i]], a_pos) for i in idx]
            singles_l = [lower_bound_check([q[i]], [r[i]], a_neg) for i in idx]
            ubc += int(all(singles_u))
            lbc += int(any(singles_l))
        assert res.ubc_passes == ubc
        assert res.lbc_passes == lbc


def test_validation_errors():
    cfg = MatchConfig(1.0, 1.0, m=1, n=2)
    with pytest.raises(ValueError):
        dual_bound_score(pv([1, 0], 2), pv([1, 0], 3), cfg)  # n mismatch
    with pytest.raises(ValueError):
        dual_bound_score(pv([1, 0], 3), pv([1, 0], 3), cfg)  # cfg.n mismatch
    with pytest.raises(ValueError):
        dual_bound_score(pv([1, 0], 2), pv([1, 0, 1], 2), cfg)  # length mismatch
    with pytest.raises(ValueError):
        MatchConfig(-0.5, 0.5, m=1, n=1)
    with pytest.raises(ValueError):
        MatchConfig(0.5, 0.5, m=0, n=1)
    with pytest.raises(ValueError):
        NoiseModel(sigma_vt=-1.0)


# ------------------------------------------------------------------- noise

def _oracle_score_noisy(q, r, cfg, ref_id):
    """Voltage-domain brute force; shares only the noise draw source."""
    noise = cfg.noise
    scale = noise.memory_window / cfg.n
    offsets = noise_voltages(noise, ref_id, len(q))
    volts = [r[i] * scale + offsets[i] for i in range(len(r))]
    subsets = math.ceil(len(q) / cfg.m)
    score = 0
    for j in range(subsets):
        idx = range(j * cfg.m, min((j + 1) * cfg.m, len(q)))
        if all(volts[i] <= (q[i] + cfg.alpha_pos) * scale for i in idx):
            score += 1
        if any(volts[i] >= (q[i] - cfg.alpha_neg) * scale for i in idx):
            score += 1
    return score


def test_noisy_score_matches_voltage_oracle():
    rng = np.random.default_rng(21)
    noise = NoiseModel(sigma_vt=0.8, memory_window=6.5, seed=77)  # large sigma to force flips
    for trial in range(30):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        length = int(rng.integers(2, 40))
        q = rng.integers(0, n + 1, size=length)
        r = rng.integers(0, n + 1, size=length)
        cfg = MatchConfig(1.5, 1.5, m=m, n=n, noise=noise)
        res = dual_bound_score(pv(q, n), pv(r, n), cfg, ref_id=f"ref-{trial}")
        assert res.score == _oracle_score_noisy(q, r, cfg, f"ref-{trial}")


def test_noise_is_deterministic_per_reference_id():
    noise = NoiseModel(sigma_vt=0.5, memory_window=6.5, seed=3)
    cfg = MatchConfig(1.0, 1.0, m=2, n=3, noise=noise)
    q = pv([0, 1, 2, 3, 1, 2], 3)
    r = pv([1, 1, 2, 0, 3, 2], 3)
    first = dual_bound_score(q, r, cfg, ref_id="ref-a")
    again = dual_bound_score(q, r, cfg, ref_id="ref-a")
    other = dual_bound_score(q, r, cfg, ref_id="ref-b")
    assert first == again
    assert first != other or noise_voltages(noise, "ref-a", 6)[0] != \
        noise_voltages(noise, "ref-b", 6)[0]


def test_noise_independent_of_batch_position():
    noise = NoiseModel(sigma_vt=0.5, memory_window=6.5, seed=3)
    cfg = MatchConfig(1.0, 1.0, m=1, n=3, noise=noise)
    rng = np.random.default_rng(1)
    refs = rng.integers(0, 4, size=(5, 12), dtype=np.uint8)
    q = rng.integers(0, 4, size=12, dtype=np.uint8)
    ids = [f"ref-{i}" for i in range(5)]
    full, _, _, _ = score_matrix(q, refs, cfg, ref_ids=ids)
    shuffled_order = [3, 0, 4, 1, 2]
    shuffled, _, _, _ = score_matrix(
        q, refs[shuffled_order], cfg, ref_ids=[ids[i] for i in shuffled_order]
    )
    for pos, orig in enumerate(shuffled_order):
        assert shuffled[pos] == full[orig]


def test_default_noise_rarely_flips_single_comparisons():
    # n = 3 spreads levels 6.5/3 V apart; with sigma = 0.2 V and a margin
    # of alpha = 1.5 levels the closest comparison sits 0.5 levels
    # (about 1.08 V, 5.4 sigma) from its bound
    noise = NoiseModel(sigma_vt=0.2, memory_window=6.5, seed=5)
    rng = np.random.default_rng(8)
    length = 20000
    q = rng.integers(0, 4, size=length, dtype=np.uint8)
    r = rng.integers(0, 4, size=length, dtype=np.uint8)
    clean_cfg = MatchConfig(1.5, 1.5, m=1, n=3)
    noisy_cfg = MatchConfig(1.5, 1.5, m=1, n=3, noise=noise)
    _, clean_u, clean_l, _ = score_matrix(q, r[None, :], clean_cfg)
    _, noisy_u, noisy_l, _ = score_matrix(q, r[None, :], noisy_cfg, ref_ids=["x"])
    flips = abs(int(clean_u[0]) - int(noisy_u[0])) + abs(int(clean_l[0]) - int(noisy_l[0]))
    assert flips / (2 * length) < 1e-3


def test_noise_requires_ref_ids():
    cfg = MatchConfig(1.0, 1.0, m=1, n=2, noise=NoiseModel())
    with pytest.raises(ValueError):
        score_matrix(np.array([1, 2]), np.array([[1, 2]]), cfg)
