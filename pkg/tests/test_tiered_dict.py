from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfdict.core_dict import canonical_pairs
from gfdict.errors import DuplicateKey, SingularSubMatrix
from gfdict.field import default_spec, fe_inv, fe_mul
from gfdict.hashfam import derive_seed, digest_x, key_digest
from gfdict.linsys import dense_solve
from gfdict.member import probe_digests
from gfdict.tiered_dict import (
    LayoutParams, MatrixCache, MatrixCacheKey, TieredDict, bad_key_threshold, build_tiered,
    build_tiered_from_digests,
    first_level, matrix_cache_solve, plan_layout, probe_count, query_tiered, tiered_bits,
)


def random_pairs(n, k, seed):
    rng = np.random.default_rng(seed)
    hi = (1 << k) if k < 63 else (1 << 62)
    return [(f"t{seed}-{i}", int(v)) for i, v in enumerate(rng.integers(0, hi, n))]


# --- layout ------------------------------------------------------------------------

def test_plan_layout_examples():
    p0 = plan_layout(0, 8)
    assert p0.bucket_count == 1
    p = plan_layout(100_000, 8)
    assert p.s == 4 and p.sub_bucket_capacity == 8 and p.slot_range == 64
    assert p.bucket_count == round(100_000 / math.ceil(math.log2(100_000) ** 2))
    assert p.bad_bucket_capacity == 2 * math.ceil(math.log2(100_000) ** 4)
    assert plan_layout(1000, 8, s=16).s == 16
    assert plan_layout(1000, 8, s=16).sub_bucket_capacity == 32
    with pytest.raises(TypeError):
        plan_layout(10, 8, nonsense=1)


def test_layout_invariants():
    with pytest.raises(ValueError):
        LayoutParams(0, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        LayoutParams(1, 1, 5, 4, 16, 1)
    with pytest.raises(ValueError):
        LayoutParams(1, 1, 2, 4, 3, 1)


# --- matrix cache --------------------------------------------------------------------

def _cache(k=8, slack=0, enabled=True, width=4, slots=8, variants=2, seed=0):
    rng = np.random.default_rng(seed)
    spec = default_spec(k)
    coef = rng.integers(0, 1 << k, (variants, slots, width), dtype=np.uint64)
    return MatrixCache(spec, coef, slack, enabled)


def test_singleton_slot_set():
    c = _cache()
    spec = c.spec
    a = int(c.coef[1, 5, 0])
    assert a != 0
    assert matrix_cache_solve(c, MatrixCacheKey((5,), 1), [77]) == [fe_mul(spec, fe_inv(spec, a), 77)]


def test_cache_hits_and_misses():
    c = _cache(seed=3)
    key = MatrixCacheKey((1, 4, 6), 0)
    b1 = matrix_cache_solve(c, key, [1, 2, 3])
    b2 = matrix_cache_solve(c, key, [9, 8, 7])
    assert (c.misses, c.hits) == (1, 1)
    for rhs, b in (([1, 2, 3], b1), ([9, 8, 7], b2)):
        mat = np.array(c.matrix(key), dtype=np.uint8)
        ref, _ = dense_solve(c.spec, mat, rhs)
        assert b == ref.tolist()


def test_singular_sub_matrix():
    c = _cache()
    c.coef[0, 2] = c.coef[0, 3]
    with pytest.raises(SingularSubMatrix):
        matrix_cache_solve(c, MatrixCacheKey((2, 3), 0), [1, 2])
    off = _cache(enabled=False)
    off.coef[0, 2] = off.coef[0, 3]
    with pytest.raises(SingularSubMatrix):
        matrix_cache_solve(off, MatrixCacheKey((2, 3), 0), [1, 2])


@given(st.integers(0, 10_000), st.sampled_from([1, 4, 8]), st.integers(1, 4))
def test_cache_matches_direct_solve(seed, k, r):
    slack = 1 if k == 1 else 0
    on = _cache(k, slack, True, width=6, slots=16, seed=seed)
    off = _cache(k, slack, False, width=6, slots=16, seed=seed)
    rng = np.random.default_rng(seed)
    key = MatrixCacheKey(tuple(sorted(rng.choice(16, r, replace=False).tolist())), 0)
    rhs = rng.integers(0, 1 << k, r).tolist()
    try:
        a = matrix_cache_solve(on, key, rhs)
    except SingularSubMatrix:
        with pytest.raises(SingularSubMatrix):
            matrix_cache_solve(off, key, rhs)
        return
    assert a == matrix_cache_solve(off, key, rhs)


# --- builds ------------------------------------------------------------------------

def test_single_pair():
    d, _ = build_tiered([("only", 5)], 8)
    assert d.params.bucket_count == 1 and d.sub_bucket_count == 1
    assert query_tiered(d, "only") == 5


def test_empty():
    d, report = build_tiered([], 8)
    assert d.query("x") == 0
    assert tiered_bits(d)[0] == 0 and report.bits_payload == 0


@pytest.mark.parametrize("k", [1, 4, 8, 16, 32, 64])
def test_exact_retrieval(k):
    pairs = random_pairs(3000, k, k)
    d, _ = build_tiered(pairs, k, seed=k)
    assert all(d.query(key) == v for key, v in pairs)
    digs = np.frombuffer(b"".join(key_digest(key) for key, _ in pairs), np.uint8).reshape(-1, 16)
    assert d.query_many(digs).tolist() == [v for _, v in pairs]


def test_duplicate_conflict():
    with pytest.raises(DuplicateKey):
        build_tiered([("same", i % 256) for i in range(10_000)], 8)


def _reference_query(d: TieredDict, members: dict[int, list[tuple[bytes, int]]], digest: bytes) -> int:
    """Re-solve the key's sub-bucket system from scratch and evaluate it."""
    loc = d.locate(digest)
    group = members[loc["sub_bucket"]]
    inner = d.bank.candidates[loc["variant"]].inner
    slots = sorted((inner.eval_x(digest_x(g)), v) for g, v in group)
    m = loc["m"]
    spec = d.spec
    mat = np.array([d._coef[loc["variant"], s, :m] for s, _ in slots], dtype=spec.dtype).reshape(len(slots), m)
    b, _ = dense_solve(spec, mat, [v for _, v in slots]) if slots else (np.zeros(m, np.uint64), 0)
    acc = 0
    for j in range(m):
        acc ^= fe_mul(spec, int(d._coef[loc["variant"], loc["slot"], j]), int(b[j]))
    return acc


@pytest.mark.parametrize("k", [1, 8])
def test_differential_against_fresh_solve(k):
    pairs = canonical_pairs(random_pairs(2000, k, 40 + k), k)
    d, _ = build_tiered_from_digests(pairs, default_spec(k), seed=3)
    groups: dict[int, list] = {}
    for dg, v in pairs:
        loc = d.locate(dg)
        assert not loc["bad"]
        groups.setdefault(loc["sub_bucket"], []).append((dg, v))
    for dg, v in pairs:
        assert _reference_query(d, groups, dg) == d.query_digest(dg) == v


def test_cache_on_off_bit_identical():
    for k in (1, 8):
        pairs = random_pairs(3000, k, 7)
        a, ra = build_tiered(pairs, k, seed=11, use_cache=True)
        b, rb = build_tiered(pairs, k, seed=11, use_cache=False)
        assert a.to_section() == b.to_section()
        assert ra.extra["cache_hits"] > 0


def test_bad_buckets_go_to_fallback():
    pairs = random_pairs(2000, 8, 9)
    d, report = build_tiered(pairs, 8, seed=2, bucket_count=100, bad_bucket_capacity=30)
    assert report.extra["bad_keys"] > 0
    assert report.extra["bad_keys"] <= bad_key_threshold(2000)
    assert len(d.bad_digests) == report.extra["bad_keys"]
    assert d.bad_digests == sorted(d.bad_digests)
    assert all(d.query(key) == v for key, v in pairs)
    bad_dig = d.bad_digests[0]
    assert probe_count(d, next(kk for kk, _ in pairs if key_digest(kk) == bad_dig)) >= 2
    # a non-member that lands in a bad bucket gets 0
    probes = probe_digests(5, 5000)
    lands = [p for p in map(bytes, probes) if d.locate(p)["bad"]]
    assert lands and all(d.query_digest(p) == 0 for p in lands)


def test_every_key_resolved_by_exactly_one_path():
    pairs = canonical_pairs(random_pairs(2000, 8, 12), 8)
    params = plan_layout(2000, 8, bucket_count=100, bad_bucket_capacity=30)
    d, _ = build_tiered_from_digests(pairs, default_spec(8), params, seed=1)
    assert d.bad_digests
    bad = set(d.bad_digests)
    for dg, _ in pairs:
        assert d.locate(dg)["bad"] == (dg in bad)


def test_offsets_and_payload_bounds():
    pairs = random_pairs(5000, 8, 13)
    d, _ = build_tiered(pairs, 8, seed=4)
    offs = d.offsets()
    assert all(a < b for a, b in zip(offs, offs[1:]))
    assert offs[-1] == len(d.payload)
    assert 5000 - len(d.bad_digests) <= len(d.payload) <= 1.25 * 5000


def test_probe_bound():
    pairs = random_pairs(5000, 8, 14)
    d, _ = build_tiered(pairs, 8, seed=5)
    cap = d.params.sub_bucket_capacity
    digs = np.frombuffer(b"".join(key_digest(k) for k, _ in pairs), np.uint8).reshape(-1, 16)
    _, probes = d.query_many(digs, with_probes=True)
    assert probes.max() <= cap + 4
    assert all(d.probe_count(bytes(g)) == p for g, p in zip(digs[:200], probes[:200]))


def test_h1_redraws_are_few():
    # each first-level draw succeeds with probability >= 1/2
    n = 10_000
    params = plan_layout(n, 8)
    ok = 0
    for s in range(50):
        xs = [digest_x(bytes(r)) for r in probe_digests(derive_seed("h1test", s), n)]
        h1, _, draws = first_level(xs, params, s, bad_key_threshold(n))
        assert h1 is not None
        ok += draws <= 4
    assert ok >= 0.95 * 50


def test_serialization_round_trip():
    pairs = random_pairs(3000, 4, 15)
    d, _ = build_tiered(pairs, 4, seed=6, bucket_count=300, bad_bucket_capacity=18)
    assert d.bad_digests
    back = TieredDict.from_section(d.spec, d.to_section())
    probes = probe_digests(1, 2000)
    assert np.array_equal(back.query_many(probes), d.query_many(probes))
    assert back.to_section() == d.to_section()
    assert all(back.query(k) == v for k, v in pairs)


def test_overhead_per_key_shrinks_with_n():
    per_key = []
    for n in (2000, 20_000):
        d, _ = build_tiered(random_pairs(n, 8, 16), 8, seed=1)
        per_key.append(tiered_bits(d)[1] / n)
    assert per_key[1] < per_key[0]


@settings(max_examples=15)
@given(st.dictionaries(st.binary(max_size=10), st.integers(0, 15), max_size=200),
       st.integers(0, 50))
def test_property_members_exact(table, seed):
    d, _ = build_tiered(table.items(), 4, seed=seed)
    assert all(d.query(k) == v for k, v in table.items())
