import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incmmf.batch import batch_mmf, best_over_tuples, best_rotation_for_tuple
from incmmf.graph import MmfConfig, MmfGraph, error_identity, factorization_error
from incmmf.incremental import (
    InsertionInvariantError,
    _check_bookkeeping,
    check_insert,
    extend_matrix,
    generate_tuples,
    incremental_mmf,
    initial_size,
    insert_row,
)
from incmmf.io import generate_synthetic

from conftest import random_psd, random_symmetric


def _sets(cands):
    return {c.indices for c in cands}


def test_generate_tuples_nominal_case():
    cands = generate_tuples((1, 2, 3), {9})
    assert _sets(cands) == {(1, 2, 3), (9, 2, 3), (1, 9, 3), (1, 2, 9)}
    assert len(cands) == 4
    assert cands[0].provenance == "old-graph"
    assert {c.provenance for c in cands[1:]} == {"swap-in"}


def test_generate_tuples_with_stale_slot():
    cands = generate_tuples((1, 2, 3), {9, 4}, stale={2})
    assert len(cands) == 6
    assert _sets(cands) == {
        (1, 4, 3), (9, 4, 3), (1, 4, 9),
        (1, 9, 3), (4, 9, 3), (1, 9, 4),
    }
    assert all(2 not in c.indices for c in cands)


def test_generate_tuples_empty_insert_set():
    assert _sets(generate_tuples((1, 2, 3), set())) == {(1, 2, 3)}


def test_generate_tuples_rejects_corrupt_state():
    with pytest.raises(ValueError, match="too small"):
        generate_tuples((1, 2, 3), {9}, stale={1, 2})


def test_extend_matrix_borders_symmetrically():
    C = random_symmetric(3, 0)
    w = np.array([1.0, 2.0, 3.0, 4.0])
    Ct = extend_matrix(C, w)
    assert np.array_equal(Ct[:3, :3], C)
    assert np.array_equal(Ct[3], w) and np.array_equal(Ct[:, 3], w)
    with pytest.raises(ValueError, match="4 entries"):
        extend_matrix(C, w[:3])


@pytest.mark.parametrize("seed", range(6))
def test_check_insert_decoupled_row_reaches_zero_error(seed):
    # a new coordinate with no coupling can always absorb the level at zero cost
    C = random_symmetric(5, seed)
    cfg = MmfConfig(k=2, variant="eigen")
    g, _ = batch_mmf(C, cfg)
    A = extend_matrix(C, np.r_[np.zeros(5), 2.0])
    lv = g.levels[0]
    t, s, z, choice = check_insert(A, set(range(6)), lv.indices, lv.wavelet, {5}, cfg)
    kept = best_rotation_for_tuple(A, range(6), lv.indices, mode="eigen")
    assert choice.error <= kept.error
    assert choice.error <= 1e-12
    if lv.wavelet in t:
        assert s == lv.wavelet and z == {5}
    else:
        # the old wavelet was swapped out, so the new index is retired in its place
        assert s == 5 and z == {lv.wavelet}


@pytest.mark.parametrize("seed", [0, 5])
def test_check_insert_duplicate_column_prefers_swap(seed):
    C = random_symmetric(5, seed)
    cfg = MmfConfig(k=2, variant="eigen")
    g, _ = batch_mmf(C, cfg)
    lv = g.levels[0]
    dup = lv.indices[0]
    A = extend_matrix(C, np.r_[C[:, dup], C[dup, dup]])
    errs = {c.indices: best_rotation_for_tuple(A, range(6), c.indices, mode="eigen").error
            for c in generate_tuples(lv.indices, {5})}
    swaps = [e for t, e in errs.items() if 5 in t]
    assert min(swaps) < errs[lv.indices]
    t, s, z, choice = check_insert(A, set(range(6)), lv.indices, lv.wavelet, {5}, cfg)
    assert choice.error == pytest.approx(min(errs.values()), abs=1e-12)
    if s == 5:
        assert z == {lv.wavelet}


def test_check_insert_empty_insert_set_keeps_old_level():
    C = random_symmetric(6, 3)
    cfg = MmfConfig(k=3, variant="eigen")
    g, _ = batch_mmf(C, cfg)
    lv = g.levels[0]
    t, s, z, choice = check_insert(C, set(range(6)), lv.indices, lv.wavelet, set(), cfg)
    assert sorted(t) == sorted(lv.indices)
    assert s == lv.wavelet and z == set()
    assert choice.error == pytest.approx(lv.level_error, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_check_insert_candidate_dominance(seed):
    m = 8
    C = random_psd(m, seed)
    cfg = MmfConfig(k=3, dict_size=20, seed=seed)
    g, _ = batch_mmf(C, cfg)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(m + 1)
    A = extend_matrix(C, w)
    for lv in g.levels[:1]:
        dictionary = np.stack([np.linalg.qr(rng.standard_normal((3, 3)))[0] for _ in range(20)])
        t, s, z, choice = check_insert(A, set(range(m + 1)), lv.indices, lv.wavelet, {m}, cfg,
                                       dictionary=dictionary)
        kept = best_over_tuples(A, range(m + 1), [lv.indices], 3, "both", dictionary=dictionary)
        assert choice.error <= kept.error + 1e-12 * np.sum(A * A)


def test_bookkeeping_check_raises_on_mismatch():
    _check_bookkeeping(1, {0, 1, 2}, {0, 1}, {2})
    with pytest.raises(InsertionInvariantError, match="insert set"):
        _check_bookkeeping(1, {0, 1, 2}, {0, 1}, {1})
    with pytest.raises(InsertionInvariantError, match="old active"):
        _check_bookkeeping(1, {0, 1, 2}, {0}, {1, 2})


def test_insert_row_diagonal_is_exact_and_keeps_tuples():
    C = np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
    cfg = MmfConfig(k=2, variant="eigen")
    g, _ = batch_mmf(C, cfg.with_(n_levels=3))
    w = np.r_[np.zeros(5), 6.0]
    new = insert_row(C, w, g, cfg)
    assert new.n_levels == 4 and new.m == 6
    Ct = extend_matrix(C, w)
    assert factorization_error(Ct, new)[0] == 0.0
    # every old level keeps its wavelet
    assert new.wavelets[:3] == g.wavelets


def test_insert_row_duplicate_column_identity():
    C = random_symmetric(5, 11)
    cfg = MmfConfig(k=2, variant="eigen")
    g, _ = batch_mmf(C, cfg.with_(n_levels=3))
    w = np.r_[C[:, 3], C[3, 3]]
    new = insert_row(C, w, g, cfg)
    assert new.n_levels == 4
    direct, level_sum, offcore, rel = error_identity(extend_matrix(C, w), new)
    assert rel <= 1e-8


def _single_insert_gaps():
    gaps = []
    for seed in range(6):
        for C in (generate_synthetic("hierarchical-block", 21, seed=seed, depth=3, boost=0.5,
                                     noise=0.02).values, random_psd(21, seed)):
            cfg = MmfConfig(k=3, seed=0)
            base, _ = batch_mmf(C[:20, :20], cfg)
            new = insert_row(C[:20, :20], C[20], base, cfg)
            batch, _ = batch_mmf(C, cfg)
            gap = factorization_error(C, new)[0] - factorization_error(C, batch)[0]
            gaps.append(gap / np.linalg.norm(C))
    return np.array(gaps)


def test_insert_row_close_to_batch_typically():
    gaps = _single_insert_gaps()
    assert np.median(gaps) <= 0.05
    assert gaps.max() <= 0.1


@pytest.mark.xfail(strict=True, reason="a single insertion occasionally loses more than 5% of ||C||")
def test_insert_row_close_to_batch_every_case():
    assert _single_insert_gaps().max() <= 0.05


def test_insert_row_validation():
    C = random_symmetric(5, 0)
    g, _ = batch_mmf(C, MmfConfig(k=2, variant="eigen"))
    with pytest.raises(ValueError, match="does not match"):
        insert_row(C, np.zeros(6), g, MmfConfig(k=3))
    with pytest.raises(ValueError, match="graph expects"):
        insert_row(random_symmetric(4, 0), np.zeros(5), g, MmfConfig(k=2))
    with pytest.raises(ValueError, match="6 entries"):
        insert_row(C, np.zeros(5), g, MmfConfig(k=2))


def test_insert_row_trace_has_unit_insert_sets_on_generic_input():
    C = random_psd(12, 4)
    cfg = MmfConfig(k=3, seed=0)
    g, _ = batch_mmf(C[:11, :11], cfg)
    trace = []
    insert_row(C[:11, :11], C[11], g, cfg, trace=trace)
    assert len(trace) == g.n_levels
    assert all(rec["z_size"] == 1 for rec in trace)
    assert all(rec["new_active"] == rec["old_active"] + 1 for rec in trace)


def test_initial_size_rounding():
    cfg = MmfConfig(k=3, init_fraction=0.1)
    assert initial_size(60, cfg) == 6
    assert initial_size(25, cfg) == 3
    assert initial_size(35, cfg) == 4
    assert initial_size(10, cfg.with_(init_fraction=1.0)) == 10


def test_incremental_full_init_equals_batch():
    C = random_symmetric(10, 2)
    cfg = MmfConfig(k=3, seed=4, init_fraction=1.0)
    inc = incremental_mmf(C, cfg)
    batch, _ = batch_mmf(C, cfg)
    assert [lv.indices for lv in inc.levels] == [lv.indices for lv in batch.levels]
    assert np.array_equal(inc.level_errors, batch.level_errors)


def _two_block_gap(seed):
    C = np.zeros((20, 20))
    C[:10, :10] = random_psd(10, 2 * seed)
    C[10:, 10:] = random_psd(10, 2 * seed + 1)
    cfg = MmfConfig(k=3, seed=0, init_fraction=0.1)
    inc = incremental_mmf(C, cfg)
    batch, _ = batch_mmf(C, cfg)
    gap = factorization_error(C, inc)[0] - factorization_error(C, batch)[0]
    return gap / np.linalg.norm(C)


def test_incremental_block_diagonal_gap_is_bounded():
    gaps = [_two_block_gap(seed) for seed in range(3)]
    assert max(gaps) <= 0.15


@pytest.mark.xfail(strict=True, reason="incremental loses more than 5% of ||C|| on this family")
def test_incremental_block_diagonal_within_five_percent():
    assert max(_two_block_gap(seed) for seed in range(3)) <= 0.05


def test_incremental_levels_and_identity():
    C = random_psd(15, 7)
    g = incremental_mmf(C, MmfConfig(k=3, seed=1, check_invariants=True))
    assert g.n_levels == 13
    assert error_identity(C, g)[3] <= 1e-8


def test_incremental_partial_levels():
    C = random_psd(15, 8)
    g = incremental_mmf(C, MmfConfig(k=3, n_levels=5, seed=1, init_fraction=0.5))
    assert g.n_levels == 5
    assert error_identity(C, g)[3] <= 1e-8


def test_incremental_shuffle_is_seeded_and_valid():
    C = random_psd(14, 9)
    cfg = MmfConfig(k=3, seed=3, insert_order="shuffle", check_invariants=True)
    a = incremental_mmf(C, cfg)
    b = incremental_mmf(C, cfg)
    assert a.wavelets == b.wavelets
    assert np.array_equal(a.level_errors, b.level_errors)
    assert error_identity(C, a)[3] <= 1e-8


def test_incremental_rejects_small_matrix():
    with pytest.raises(ValueError, match="smaller than"):
        incremental_mmf(np.eye(2), MmfConfig(k=3))


def test_unit_insert_set_on_generic_inputs():
    sizes = []
    for seed in range(4):
        trace = []
        incremental_mmf(random_psd(20, seed), MmfConfig(k=3, seed=seed), trace=trace)
        sizes.extend(rec["z_size"] for rec in trace)
    assert np.mean(np.array(sizes) == 1) >= 0.99


@settings(max_examples=15, deadline=None)
@given(m=st.integers(5, 12), k=st.integers(2, 3), seed=st.integers(0, 10**6),
       frac=st.sampled_from([0.1, 0.3, 0.5]),
       variant=st.sampled_from(["exhaustive", "eigen", "correlation-greedy"]))
def test_incremental_invariants_property(m, k, seed, frac, variant):
    C = random_symmetric(m, seed)
    cfg = MmfConfig(k=k, seed=seed, init_fraction=frac, variant=variant, dict_size=10,
                    check_invariants=True)
    g = incremental_mmf(C, cfg)
    assert isinstance(g, MmfGraph) and g.n_levels == m - k + 1
    assert error_identity(C, g)[3] <= 1e-8


@pytest.mark.slow
def test_incremental_faster_than_batch_at_moderate_size():
    C = generate_synthetic("random-psd", 60, seed=0).values
    cfg = MmfConfig(k=3, seed=0)
    t0 = time.perf_counter()
    batch_mmf(C, cfg)
    t_batch = time.perf_counter() - t0
    t0 = time.perf_counter()
    incremental_mmf(C, cfg)
    t_inc = time.perf_counter() - t0
    assert t_batch / t_inc >= 2.0
