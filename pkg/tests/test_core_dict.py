from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gfdict.core_dict import (
    CoreDict, RowRule, build_core, build_from_digests, canonical_pairs, core_bits, pure_sparsity,
)
from gfdict.errors import BuildFailed, DuplicateKey, SystemTooLarge, ValueOutOfRange
from gfdict.field import default_spec, fe_inv, fe_mul
from gfdict.hashfam import key_digest
from gfdict.linsys import min_variables


def random_pairs(n, k, seed):
    rng = np.random.default_rng(seed)
    vals = rng.integers(0, 1 << k, n, dtype=np.uint64, endpoint=False) if k < 64 else \
        rng.integers(0, 1 << 63, n, dtype=np.uint64)
    return [(f"s{seed}-{i}", int(v)) for i, v in enumerate(vals)]


def test_single_key_hand_solve():
    d, report = build_core([("x", 0xF)], 4, mode="dense", slack=0)
    assert d.m == 1 and report.attempts >= 1
    f = default_spec(4)
    a = int(d.rule.row(f, key_digest("x")).coeffs[0])
    assert a != 0
    assert d.b == [fe_mul(f, fe_inv(f, a), 0xF)]
    assert d.query("x") == 0xF


@pytest.mark.parametrize("mode", ["dense", "sparse", "pure"])
def test_empty_dictionary(mode):
    d, report = build_core([], 8, mode=mode, slack=3)
    assert d.query("anything") == 0
    assert report.bits_payload == d.m * 8


@pytest.mark.parametrize("mode,k", [(m, k) for m in ("dense", "sparse") for k in (1, 4, 8, 16, 64)]
                         + [("pure", k) for k in (4, 8, 16)])
def test_exact_retrieval(mode, k):
    pairs = random_pairs(300, k, k)
    slack = 10 if mode == "dense" else 75
    d, report = build_core(pairs, k, mode=mode, slack=slack, seed=2)
    assert all(d.query(key) == v for key, v in pairs)
    assert report.bits_payload == d.m * k
    assert all(d.query(key) == d.query(key) for key, _ in pairs[:10])


def test_duplicates():
    d, _ = build_core([("a", 1), ("a", 1), ("b", 2)], 8)
    assert d.n == 2
    with pytest.raises(DuplicateKey):
        build_core([("a", 1), ("a", 2)], 8)
    with pytest.raises(DuplicateKey):
        build_core([("x", i) for i in range(100)], 8)


def test_value_range():
    with pytest.raises(ValueOutOfRange):
        build_core([("a", 16)], 4)
    with pytest.raises(ValueOutOfRange):
        build_core([("a", -1)], 4)


def test_order_independent():
    pairs = random_pairs(200, 8, 1)
    a, _ = build_core(pairs, 8, mode="sparse", slack=50, seed=9)
    b, _ = build_core(pairs[::-1], 8, mode="sparse", slack=50, seed=9)
    assert a.b == b.b and a.rule == b.rule


def test_core_bits_examples():
    f = default_spec(8)
    d = CoreDict(f, RowRule("dense", 1000, 0, None, 1), [0] * 1000, 1000)
    assert core_bits(d)[0] == 8000
    m = min_variables(3, 1000)
    assert m == 1050
    s = CoreDict(f, RowRule("sparse", m, 3, None, 1), [0] * m, 1000)
    assert core_bits(s)[0] == 1050 * 8


def test_pure_mode_is_exactly_nk():
    pairs = random_pairs(1000, 8, 3)
    d, report = build_core(pairs, 8, mode="pure", seed=1)
    assert d.m == 1000 and report.bits_payload == 8000
    assert d.rule.t == math.ceil(math.log(1000)) == pure_sparsity(1000)
    assert all(d.query(key) == v for key, v in pairs)
    assert max(d.words_touched(key_digest(key)) for key, _ in pairs) <= math.ceil(math.log(1000))


def test_pure_mode_size_limit():
    items = canonical_pairs([(str(i), 0) for i in range(5000)], 8)
    with pytest.raises(SystemTooLarge):
        build_from_digests(items, default_spec(8), mode="pure")


def test_build_failed_when_every_attempt_is_singular():
    # fewer variables than equations: rank deficient on every attempt
    pairs = random_pairs(30, 8, 4)
    with pytest.raises(BuildFailed) as info:
        build_core(pairs, 8, mode="dense", slack=-1, max_attempts=4)
    assert info.value.attempts == 4


def test_dense_retries_are_rare():
    # per-attempt failure <= 1/255 at k=8, so >3 attempts is essentially impossible
    attempts = [build_core(random_pairs(120, 8, s), 8, mode="dense", slack=0, seed=s)[1].attempts
                for s in range(30)]
    assert sum(a <= 3 for a in attempts) == 30


def test_sparse_quarter_slack_succeeds_quickly():
    ok = 0
    for s in range(20):
        _, rep = build_core(random_pairs(1000, 8, 100 + s), 8, mode="sparse", t=3, slack=250, seed=s)
        ok += rep.attempts <= 5
    assert ok >= 19


def test_nonmembers_look_uniform():
    pairs = random_pairs(400, 8, 5)
    d, _ = build_core(pairs, 8, mode="sparse", slack=100, seed=3)
    rng = np.random.default_rng(0)
    ref = rng.integers(0, 256, 20_000)
    hits = sum(d.query(f"absent-{i}") == int(ref[i]) for i in range(20_000))
    p = 1 / 256
    assert abs(hits / 20_000 - p) < 4 * math.sqrt(p * (1 - p) / 20_000)


@settings(max_examples=25)
@given(st.dictionaries(st.binary(max_size=12), st.integers(0, 255), max_size=40),
       st.sampled_from(["dense", "sparse"]), st.integers(0, 1000))
def test_property_exact_on_members(table, mode, seed):
    d, _ = build_core(table.items(), 8, mode=mode, slack=12, seed=seed)
    assert all(d.query(k) == v for k, v in table.items())


def test_pure_mode_parity_obstruction():
    # over GF(2) every coefficient is 1; with an even row weight the all-ones vector
    # lies in the kernel, so the square system can never have full rank
    pairs = random_pairs(400, 1, 8)
    assert pure_sparsity(400) % 2 == 0
    with pytest.raises(BuildFailed):
        build_core(pairs, 1, mode="pure", max_attempts=3)
