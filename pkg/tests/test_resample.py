"""Slot orderings, nested prefix resampling, one-slot increments."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmt_noise._pairs import encode_pair, pair_count
from rmt_noise.ensemble import EnsembleSpec, SparseSymMatrix, sample_er, sample_sparse
from rmt_noise.errors import ValidationError
from rmt_noise.resample import (
    PairOrder,
    SingleResampleQuantities,
    apply_diffs,
    make_pair_order,
    make_resample_pair,
    resample_diffs,
    resample_to,
    single_resample,
    single_resample_quantities,
)

from conftest import stream


def coupled_pair(n: int, q: float, key: int, model: str = "centered-sparse"):
    spec = EnsembleSpec(n=n, q=q, model=model)
    sampler = sample_er if model == "er-adjacency" else sample_sparse
    base = sampler(spec, stream(20, key, 0))
    fresh = sampler(spec, stream(20, key, 1))
    order = make_pair_order(n, stream(20, key, 2))
    return spec, make_resample_pair(base, fresh, order)


# --- orderings -----------------------------------------------------------------


def test_prefixes_are_nested():
    order = make_pair_order(12, stream(21))
    m = pair_count(12)
    assert order.prefix(0).size == 0
    full = order.prefix(m)
    assert sorted(full.tolist()) == list(range(m))
    for k in (1, 5, 17, m - 1):
        assert np.array_equal(order.prefix(k), full[:k])


def test_prefix_bounds():
    order = make_pair_order(5, stream(22))
    with pytest.raises(ValidationError):
        order.prefix(-1)
    with pytest.raises(ValidationError):
        order.prefix(pair_count(5) + 1)


def test_in_prefix_matches_prefix():
    order = make_pair_order(9, stream(23))
    m = pair_count(9)
    codes = np.arange(m)
    for k in (0, 1, 7, m // 2, m):
        members = set(order.prefix(k).tolist())
        flags = order.in_prefix(codes, k)
        assert {int(c) for c in codes[flags]} == members


def test_lazy_order_matches_materialized():
    # Forcing the lazy path with a tiny limit must not change the semantics:
    # same prefix-validity properties, deterministic, nested.
    n = 10
    m = pair_count(n)
    lazy = PairOrder(n, stream(24), materialize_limit=1)
    again = PairOrder(n, stream(24), materialize_limit=1)
    full = lazy.prefix(m)
    assert sorted(full.tolist()) == list(range(m))
    assert np.array_equal(again.prefix(m), full)
    for k in (0, 3, m // 2):
        assert np.array_equal(lazy.prefix(k), full[:k])
        flags = lazy.in_prefix(np.arange(m), k)
        assert {int(c) for c in np.arange(m)[flags]} == set(full[:k].tolist())


def test_ordering_is_uniform_on_tiny_case():
    # n=2 has M=3 slots and 6 orderings; each should appear 1/6 of the time.
    draws = 60_000
    counts = {}
    for t in range(draws):
        perm = tuple(make_pair_order(2, stream(25, t)).prefix(3).tolist())
        counts[perm] = counts.get(perm, 0) + 1
    assert len(counts) == 6
    p = 1.0 / 6.0
    sd = math.sqrt(draws * p * (1 - p))
    for got in counts.values():
        assert abs(got - draws * p) <= 5 * sd


def test_pair_requires_matching_shapes():
    spec = EnsembleSpec(n=8, q=2.0)
    base = sample_sparse(spec, stream(26, 0))
    other = sample_sparse(EnsembleSpec(n=9, q=2.0), stream(26, 1))
    order = make_pair_order(8, stream(26, 2))
    with pytest.raises(ValidationError):
        make_resample_pair(base, other, order)
    er = sample_er(EnsembleSpec(n=8, q=2.0, model="er-adjacency"), stream(26, 3))
    with pytest.raises(ValidationError):
        make_resample_pair(base, er, order)


# --- prefix resampling -----------------------------------------------------------


def test_resample_endpoints_are_bitwise():
    _, pair = coupled_pair(16, 2.5, key=1)
    m = pair_count(16)
    assert resample_to(pair, 0).same_entries(pair.base)
    assert resample_to(pair, m).same_entries(pair.fresh)
    with pytest.raises(ValidationError):
        resample_to(pair, m + 1)


def test_resample_entrywise_oracle():
    # Every slot of the k-step matrix equals fresh on the prefix and base off it.
    n = 12
    _, pair = coupled_pair(n, 2.0, key=2)
    m = pair_count(n)
    for k in (1, 3, m // 3, m - 2):
        got = resample_to(pair, k)
        in_pref = set(pair.order.prefix(k).tolist())
        for i in range(n):
            for j in range(i, n):
                src = pair.fresh if encode_pair(i, j, n) in in_pref else pair.base
                assert got.entry(i, j) == src.entry(i, j)


def test_resampled_matrix_is_distributionally_exchangeable():
    # Any k-step matrix is itself a draw from the ensemble: entry magnitudes
    # stay on the 1/q lattice for rademacher x, and the fill fraction matches.
    spec, pair = coupled_pair(64, 4.0, key=3)
    got = resample_to(pair, pair_count(64) // 2)
    assert np.all(np.abs(np.abs(got.values) - 1.0 / spec.q) < 1e-15)
    m = pair_count(64)
    p = spec.slot_probability
    assert abs(got.nnz_upper - m * p) <= 5 * math.sqrt(m * p * (1 - p))


def test_diffs_concatenate_and_apply():
    n = 14
    _, pair = coupled_pair(n, 2.0, key=4)
    m = pair_count(n)
    k_mid, k_hi = m // 3, 2 * m // 3
    assert resample_diffs(pair, k_mid, k_mid) == []
    entries = resample_to(pair, 0).entries_dict()
    apply_diffs(entries, resample_diffs(pair, 0, k_mid))
    assert SparseSymMatrix.from_dict(n, entries, q=pair.base.q).same_entries(resample_to(pair, k_mid))
    apply_diffs(entries, resample_diffs(pair, k_mid, k_hi))
    assert SparseSymMatrix.from_dict(n, entries, q=pair.base.q).same_entries(resample_to(pair, k_hi))
    with pytest.raises(ValidationError):
        resample_diffs(pair, k_hi, k_mid)


def test_diff_count_matches_collision_rate():
    # A slot appears in the diff list only when base and fresh disagree there.
    spec, pair = coupled_pair(48, 3.0, key=5)
    m = pair_count(48)
    diffs = resample_diffs(pair, 0, m)
    base_d, fresh_d = pair.base.entries_dict(), pair.fresh.entries_dict()
    changed = sum(
        1 for c in set(base_d) | set(fresh_d) if base_d.get(c, 0.0) != fresh_d.get(c, 0.0)
    )
    assert len(diffs) == changed


# --- single-slot resampling -------------------------------------------------------


def test_single_resample_locality():
    spec = EnsembleSpec(n=10, q=2.0)
    h = sample_sparse(spec, stream(27, 0))
    resampled, quant = single_resample(spec, h, 6, 2, stream(27, 1))
    assert quant.pair == (2, 6)
    code = encode_pair(2, 6, 10)
    # All slots except the resampled one are untouched.
    a, b = h.entries_dict(), resampled.entries_dict()
    a.pop(code, None)
    b.pop(code, None)
    assert a == b
    recovered = single_resample_quantities(h, resampled, 2, 6)
    assert recovered == quant


def test_single_resample_er_diagonal_noop():
    spec = EnsembleSpec(n=12, q=2.0, model="er-adjacency")
    a = sample_er(spec, stream(28, 0))
    resampled, quant = single_resample(spec, a, 5, 5, stream(28, 1))
    assert resampled is a
    assert quant == SingleResampleQuantities(pair=(5, 5), q_st=0.0, z_st=0.0)


def test_single_resample_out_of_range():
    spec = EnsembleSpec(n=6, q=2.0)
    h = sample_sparse(spec, stream(29))
    with pytest.raises(ValidationError):
        single_resample(spec, h, 0, 6, stream(29, 1))


def test_increments_worked_examples():
    # Slot emptied on the diagonal: h = 1/q -> 0 gives q_st = 1/(n q^2), z = 1/q.
    n, q = 8, 2.0
    code_d = encode_pair(3, 3, n)
    h = SparseSymMatrix.from_dict(n, {code_d: 1.0 / q}, q=q)
    h2 = SparseSymMatrix.from_dict(n, {}, q=q)
    quant = single_resample_quantities(h, h2, 3, 3)
    assert quant.q_st == pytest.approx(1.0 / (n * q * q), abs=1e-16)
    assert quant.z_st == pytest.approx(1.0 / q, abs=1e-16)
    # Off-diagonal slots carry the symmetry factor 2.
    code_o = encode_pair(1, 4, n)
    g = SparseSymMatrix.from_dict(n, {code_o: 0.5}, q=q)
    g2 = SparseSymMatrix.from_dict(n, {code_o: -0.25}, q=q)
    quant = single_resample_quantities(g, g2, 4, 1)
    assert quant.q_st == pytest.approx(2.0 * (0.25 - 0.0625) / n, abs=1e-16)
    assert quant.z_st == pytest.approx(2.0 * 0.75, abs=1e-16)


def test_quantities_reject_nonlocal_difference():
    n, q = 8, 2.0
    h = SparseSymMatrix.from_dict(n, {0: 0.5, 7: 0.5}, q=q)
    g = SparseSymMatrix.from_dict(n, {0: -0.5, 7: 0.25}, q=q)
    with pytest.raises(ValidationError):
        single_resample_quantities(h, g, 0, 0)


def test_entry_increment_second_moment():
    # E[z_st^2] = 2 E[(h - h'')^2] * 2 = 8/n off-diagonal and 2/n on the
    # diagonal, since each slot value has variance 1/n.
    spec = EnsembleSpec(n=16, q=2.0)
    draws = 4000
    z_off, z_diag = [], []
    for t in range(draws):
        h = sample_sparse(spec, stream(30, t, 0))
        _, q_o = single_resample(spec, h, 2, 9, stream(30, t, 1))
        _, q_d = single_resample(spec, h, 4, 4, stream(30, t, 2))
        z_off.append(q_o.z_st)
        z_diag.append(q_d.z_st)
    z_off, z_diag = np.array(z_off), np.array(z_diag)
    n = spec.n
    # Fourth-moment-based standard errors for the mean of z^2.
    for vals, target in ((z_off, 8.0 / n), (z_diag, 2.0 / n)):
        se = np.std(vals**2, ddof=1) / math.sqrt(draws)
        assert abs(np.mean(vals**2) - target) <= 5 * se + 1e-12


@given(st.integers(min_value=2, max_value=12), st.data())
@settings(max_examples=30, deadline=None)
def test_resample_prefix_consistency_property(n, data):
    key = data.draw(st.integers(min_value=0, max_value=10_000))
    _, pair = coupled_pair(n, min(1.5, math.sqrt(n)), key=100 + key)
    m = pair_count(n)
    k1 = data.draw(st.integers(min_value=0, max_value=m))
    k2 = data.draw(st.integers(min_value=k1, max_value=m))
    # Walking 0 -> k1 -> k2 by diffs equals jumping straight to k2.
    entries = pair.base.entries_dict()
    apply_diffs(entries, resample_diffs(pair, 0, k1))
    apply_diffs(entries, resample_diffs(pair, k1, k2))
    walked = SparseSymMatrix.from_dict(n, entries, q=pair.base.q)
    assert walked.same_entries(resample_to(pair, k2))
