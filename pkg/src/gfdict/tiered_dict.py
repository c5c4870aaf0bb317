"""Two-level bucketed dictionary with constant-probe queries.

Build pipeline:

1. ``h1`` (pairwise) spreads the keys over ``bucket_count`` buckets.  Buckets
   holding more than ``bad_bucket_capacity`` keys are *bad*; their keys go to
   an exact sorted fallback table.  ``h1`` is redrawn while the bad buckets
   hold more than max(n / ceil(log2(n)^2), 64) keys.
2. Each good bucket with B keys is split into q = ceil(B / s) sub-buckets by
   a per-bucket pairwise hash, redrawn until every sub-bucket fits.  Buckets
   that already fit in one sub-bucket are not split.
3. Each sub-bucket picks the first bank candidate whose inner hash sends its
   keys to distinct slots in [0, slot_range) *and* whose induced matrix has
   full row rank.  A key in slot j gets the coefficient row derived from the
   candidate's table entry R[j], so the matrix only depends on the set of
   occupied slots.  Solution operators are memoised per (slot set, candidate).

Memory layout used by queries (each item is one word):

* bucket word ``first_sub << 24 | q << 8 | split_choice`` (q = 0 marks bad);
* sub-bucket word ``first_payload_word << 8 | candidate``, plus a sentinel;
* the candidate's table entry R[slot];
* the sub-bucket's payload words.

A good-bucket query therefore reads ``4 + words_in_sub_bucket`` words.
"""

from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core_dict import BuildReport, DEFAULT_MAX_ATTEMPTS, FIELD_BYTES, canonical_pairs
from .errors import BuildFailed, CorruptFile, NoGoodFunction, Singular, SingularSubMatrix
from .field import FieldSpec, default_spec, fe_inv, fe_mul, mul_vec
from .fileformat import Reader, pack_words, packed_len, unpack_words
from .hashfam import (
    P61, HashBank, PairwiseHash, bank_new, default_bank_size, derive_seed, digest_x,
    digests_x, key_digest, pairwise_eval_many, pairwise_new, select_bucket_hash,
    splitmix64_vec,
)
from .linsys import dense_solve

MAX_SPLIT_DRAWS = 256
MAX_H1_DRAWS = 32
BAD_KEY_FLOOR = 64


def _log2(n: int) -> float:
    return math.log2(n) if n > 1 else 0.0


@dataclass(frozen=True)
class LayoutParams:
    bucket_count: int
    bad_bucket_capacity: int
    s: int
    sub_bucket_capacity: int
    slot_range: int
    bank_size: int
    # extra variables per sub-bucket system (one helps a lot over GF(2))
    sub_slack: int = 0

    def __post_init__(self):
        if self.bucket_count < 1:
            raise ValueError("bucket_count must be >= 1")
        if not 1 <= self.s <= self.sub_bucket_capacity:
            raise ValueError("need 1 <= s <= sub_bucket_capacity")
        if self.slot_range < self.sub_bucket_capacity:
            raise ValueError("slot_range must be >= sub_bucket_capacity")
        if not 1 <= self.bank_size <= 255:
            raise ValueError("bank_size must lie in 1..255")
        if not 0 <= self.sub_slack < self.sub_bucket_capacity:
            raise ValueError("sub_slack must be smaller than sub_bucket_capacity")
        if self.sub_bucket_capacity > 255:
            raise ValueError("sub_bucket_capacity must be <= 255")

    @property
    def keys_per_sub_bucket(self) -> int:
        return self.sub_bucket_capacity - self.sub_slack


def plan_layout(n: int, k: int, **overrides) -> LayoutParams:
    lg = _log2(n)
    if n <= 1:
        bucket_count = 1
    else:
        bucket_count = max(1, round(n / math.ceil(lg * lg)))
    load = n / bucket_count
    bad_cap = max(2 * math.ceil(lg ** 4), math.ceil(4 * load), 1)
    s = max(4, round(0.5 * math.sqrt(lg / k))) if lg > 0 else 4
    s = overrides.get("s", s)
    slack = overrides.get("sub_slack", 1 if k == 1 else 0)
    # capacity counts payload words, so the slack variables come on top of 2s keys
    cap = overrides.get("sub_bucket_capacity", 2 * s + slack)
    params = dict(
        bucket_count=bucket_count,
        bad_bucket_capacity=bad_cap,
        s=s,
        sub_bucket_capacity=cap,
        slot_range=4 * s * s,
        bank_size=max(default_bank_size(n), 16),
        sub_slack=slack,
    )
    unknown = set(overrides) - set(params)
    if unknown:
        raise TypeError(f"unknown layout override(s): {sorted(unknown)}")
    params.update(overrides)
    return LayoutParams(**params)


def bad_key_threshold(n: int) -> float:
    lg = _log2(n)
    return max(n / math.ceil(lg * lg) if lg > 0 else n, BAD_KEY_FLOOR)


# --- small matrices ------------------------------------------------------------

def coefficient_table(spec: FieldSpec, bank: HashBank, width: int) -> np.ndarray:
    """coef[v, slot, j]: coefficient of variable j for a key in ``slot`` under candidate v."""
    tables = np.stack([c.table for c in bank.candidates]).astype(np.uint64)
    j = np.arange(width, dtype=np.uint64)
    z = (tables[:, :, None] << np.uint64(8)) | j[None, None, :]
    return splitmix64_vec(z) & np.uint64(spec.mask)


def solution_operator(spec: FieldSpec, rows: list[list[int]], m: int) -> list[list[int]]:
    """Matrix P (m x r) with P . d = the free-variables-zero solution of rows . b = d.

    Gauss-Jordan on [A | I]; raises SingularSubMatrix if the rows are dependent.
    """
    r = len(rows)
    work = [list(row) + [1 if i == j else 0 for j in range(r)] for i, row in enumerate(rows)]
    pivots = []
    prow = 0
    for col in range(m):
        if prow == r:
            break
        p = next((i for i in range(prow, r) if work[i][col]), None)
        if p is None:
            continue
        work[prow], work[p] = work[p], work[prow]
        pr = work[prow]
        if pr[col] != 1:
            inv = fe_inv(spec, pr[col])
            pr = [fe_mul(spec, inv, x) for x in pr]
            work[prow] = pr
        for i in range(r):
            if i != prow:
                f = work[i][col]
                if f:
                    wi = work[i]
                    work[i] = [a ^ fe_mul(spec, f, b) for a, b in zip(wi, pr)]
        pivots.append(col)
        prow += 1
    if prow < r:
        raise SingularSubMatrix(f"rank {prow} < {r}")
    op = [[0] * r for _ in range(m)]
    for i, c in enumerate(pivots):
        op[c] = work[i][m:]
    return op


@dataclass(frozen=True)
class MatrixCacheKey:
    slot_set: tuple[int, ...]
    variant: int


class MatrixCache:
    """Memoised solution operators keyed by (occupied slots, candidate)."""

    def __init__(self, spec: FieldSpec, coef: np.ndarray, slack: int, enabled: bool = True):
        self.spec = spec
        self.coef = coef
        self.slack = slack
        self.enabled = enabled
        self.hits = 0
        self.misses = 0
        self._ops: dict[MatrixCacheKey, list[list[int]] | None] = {}

    def variables(self, r: int) -> int:
        return max(1, r + self.slack)

    def matrix(self, key: MatrixCacheKey) -> list[list[int]]:
        m = self.variables(len(key.slot_set))
        return [[int(c) for c in self.coef[key.variant, s, :m]] for s in key.slot_set]

    def operator(self, key: MatrixCacheKey) -> list[list[int]]:
        if key in self._ops:
            self.hits += 1
            op = self._ops[key]
        else:
            self.misses += 1
            try:
                op = solution_operator(self.spec, self.matrix(key), self.variables(len(key.slot_set)))
            except SingularSubMatrix:
                op = None
            self._ops[key] = op
        if op is None:
            raise SingularSubMatrix(f"singular sub-bucket matrix for {key}")
        return op

    def __len__(self):
        return len(self._ops)


def matrix_cache_solve(cache: MatrixCache, cache_key: MatrixCacheKey, rhs: list[int]) -> list[int]:
    spec = cache.spec
    if not cache.enabled:
        m = cache.variables(len(cache_key.slot_set))
        if not cache_key.slot_set:
            return [0] * m
        mat = np.array(cache.matrix(cache_key), dtype=spec.dtype).reshape(len(rhs), m)
        try:
            b, _ = dense_solve(spec, mat, rhs)
        except Singular:
            raise SingularSubMatrix(f"singular sub-bucket matrix for {cache_key}") from None
        return [int(x) for x in b]
    op = cache.operator(cache_key)
    out = []
    for prow in op:
        acc = 0
        for c, d in zip(prow, rhs):
            if c and d:
                acc ^= fe_mul(spec, c, d)
        out.append(acc)
    return out


# --- the dictionary ------------------------------------------------------------

@dataclass
class TieredDict:
    spec: FieldSpec
    params: LayoutParams
    n: int
    h1: PairwiseHash
    split_seed: int
    bank: HashBank
    bucket_words: list[int]
    sub_words: list[int]
    payload: list[int]
    bad_digests: list[bytes]
    bad_values: list[int]
    _coef: np.ndarray = field(default=None, repr=False)
    _splits: list = field(default=None, repr=False)

    def __post_init__(self):
        width = self.params.sub_bucket_capacity
        self._coef = coefficient_table(self.spec, self.bank, width)
        self._coef_rows = [[[int(c) for c in row] for row in cand] for cand in self._coef]
        self._splits = [None if ((w >> 8) & 0xFFFF) == 0 else
                        split_hash(self.split_seed, i, w & 0xFF, (w >> 8) & 0xFFFF)
                        for i, w in enumerate(self.bucket_words)]
        self._inner = [(c.inner.a, c.inner.b) for c in self.bank.candidates]

    # -- layout accessors
    @property
    def sub_bucket_count(self) -> int:
        return len(self.sub_words) - 1

    def offsets(self) -> list[int]:
        return [w >> 8 for w in self.sub_words]

    def locate(self, digest: bytes) -> dict:
        """Where a key lives: bucket, sub-bucket, payload span, candidate, slot."""
        x = digest_x(digest)
        i = self.h1.eval_x(x)
        w = self.bucket_words[i]
        q = (w >> 8) & 0xFFFF
        if q == 0:
            return {"bucket": i, "bad": True}
        g = (w >> 24) + self._splits[i].eval_x(x)
        s0, s1 = self.sub_words[g], self.sub_words[g + 1]
        start, v = s0 >> 8, s0 & 0xFF
        a, b = self._inner[v]
        slot = ((a * x + b) % P61) % self.params.slot_range
        return {"bucket": i, "bad": False, "sub_bucket": g, "start": start,
                "m": (s1 >> 8) - start, "variant": v, "slot": slot}

    def _bad_lookup(self, digest: bytes) -> tuple[int, int]:
        """(value, probes) via binary search over the sorted fallback table."""
        lo, hi = 0, len(self.bad_digests)
        probes = 0
        while lo < hi:
            mid = (lo + hi) // 2
            probes += 1
            d = self.bad_digests[mid]
            if d == digest:
                return self.bad_values[mid], probes
            if d < digest:
                lo = mid + 1
            else:
                hi = mid
        return 0, probes

    def query_digest(self, digest: bytes) -> int:
        x = digest_x(digest)
        i = self.h1.eval_x(x)
        w = self.bucket_words[i]
        if (w >> 8) & 0xFFFF == 0:
            return self._bad_lookup(digest)[0]
        g = (w >> 24) + self._splits[i].eval_x(x)
        s0 = self.sub_words[g]
        start, v = s0 >> 8, s0 & 0xFF
        m = (self.sub_words[g + 1] >> 8) - start
        a, b = self._inner[v]
        row = self._coef_rows[v][((a * x + b) % P61) % self.params.slot_range]
        spec = self.spec
        acc = 0
        payload = self.payload
        for j in range(m):
            c, y = row[j], payload[start + j]
            if c and y:
                acc ^= fe_mul(spec, c, y)
        return acc

    def query(self, key: bytes | str) -> int:
        return self.query_digest(key_digest(key))

    def probe_count(self, digest: bytes) -> int:
        """Distinct words read by a query: bucket word, sub-bucket words, bank entry, payload."""
        loc = self.locate(digest)
        if loc["bad"]:
            return 1 + self._bad_lookup(digest)[1]
        return 4 + loc["m"]

    # -- batched path
    def _arrays(self):
        cache = self.__dict__.get("_np")
        if cache is None:
            bw = np.array(self.bucket_words, dtype=np.uint64)
            sa = np.array([1 if s is None else s.a for s in self._splits], dtype=np.uint64)
            sb = np.array([0 if s is None else s.b for s in self._splits], dtype=np.uint64)
            sr = np.array([1 if s is None else s.range for s in self._splits], dtype=np.uint64)
            cand_a = np.array([a for a, _ in self._inner], dtype=np.uint64)
            cand_b = np.array([b for _, b in self._inner], dtype=np.uint64)
            cache = {
                "bw": bw, "sa": sa, "sb": sb, "sr": sr, "ca": cand_a, "cb": cand_b,
                "sw": np.array(self.sub_words + self.sub_words[-1:], dtype=np.uint64),
                "payload": np.array(self.payload + [0], dtype=self.spec.dtype),
                "coef": self._coef.astype(self.spec.dtype),
            }
            self.__dict__["_np"] = cache
        return cache

    def query_many_x(self, xs: np.ndarray, digests=None, with_probes: bool = False):
        """Vectorised queries.  ``digests`` (N x 16 uint8) is only needed for bad-bucket keys."""
        A = self._arrays()
        xs = np.asarray(xs, dtype=np.uint64)
        bucket = pairwise_eval_many(self.h1.a, self.h1.b, self.h1.range, xs).astype(np.intp)
        w = A["bw"][bucket]
        q = (w >> np.uint64(8)) & np.uint64(0xFFFF)
        good = q > 0
        sub = pairwise_eval_many(A["sa"][bucket], A["sb"][bucket], A["sr"][bucket], xs)
        g = ((w >> np.uint64(24)) + sub).astype(np.intp)
        g = np.where(good, g, 0)
        s0 = A["sw"][g]
        start = (s0 >> np.uint64(8)).astype(np.intp)
        v = (s0 & np.uint64(0xFF)).astype(np.intp)
        m = (A["sw"][g + 1] >> np.uint64(8)).astype(np.intp) - start
        slot = pairwise_eval_many(A["ca"][v], A["cb"][v], self.params.slot_range, xs).astype(np.intp)
        cap = self.params.sub_bucket_capacity
        j = np.arange(cap)
        valid = j[None, :] < m[:, None]
        idx = np.where(valid, start[:, None] + j[None, :], len(self.payload))
        words = A["payload"][idx]
        coefs = A["coef"][v, slot]
        vals = np.bitwise_xor.reduce(mul_vec(self.spec, coefs, words), axis=1).astype(np.uint64)
        probes = (4 + m) if with_probes else None
        bad_idx = np.flatnonzero(~good)
        if bad_idx.size:
            if digests is None:
                raise ValueError("digests are required when queries hit bad buckets")
            for i in bad_idx.tolist():
                val, pr = self._bad_lookup(bytes(digests[i]))
                vals[i] = val
                if with_probes:
                    probes[i] = 1 + pr
        return (vals, probes) if with_probes else vals

    def query_many(self, digests: np.ndarray, with_probes: bool = False):
        digests = np.asarray(digests, dtype=np.uint8).reshape(-1, 16)
        return self.query_many_x(digests_x(digests), digests, with_probes)

    # -- serialization
    def word_width(self) -> int:
        return 4 if (len(self.payload) << 8) < (1 << 32) else 8

    def to_section(self) -> bytes:
        p = self.params
        ww = self.word_width()
        vb = (self.spec.k + 7) // 8
        head = struct.pack(
            "<QQQQQQQQQBQQQB",
            self.n, p.bucket_count, p.bad_bucket_capacity, p.s, p.sub_bucket_capacity,
            p.slot_range, p.bank_size, p.sub_slack, self.split_seed, ww,
            self.sub_bucket_count, len(self.payload), len(self.bad_digests), vb)
        parts = [head, self.h1.to_bytes(),
                 np.array(self.bucket_words, dtype="<u8").tobytes(),
                 np.array(self.sub_words, dtype=f"<u{ww}").tobytes(),
                 self.bank.to_bytes(),
                 pack_words(self.payload, self.spec.k)]
        parts += [d + v.to_bytes(vb, "little") for d, v in zip(self.bad_digests, self.bad_values)]
        return b"".join(parts)

    @classmethod
    def from_section(cls, spec: FieldSpec, buf: bytes) -> "TieredDict":
        r = Reader(buf, "TIER")
        (n, bc, badcap, s, cap, slot_range, bank_size, slack, split_seed, ww,
         nsub, npay, nbad, vb) = r.unpack("QQQQQQQQQBQQQB")
        if ww not in (4, 8):
            raise CorruptFile("bad sub-bucket word width")
        try:
            params = LayoutParams(bc, badcap, s, cap, slot_range, bank_size, slack)
        except ValueError as exc:
            raise CorruptFile(f"invalid layout: {exc}") from None
        h1 = PairwiseHash.from_bytes(r.take(PairwiseHash.SIZE))
        bucket_words = np.frombuffer(r.take(8 * bc), dtype="<u8").tolist()
        sub_words = np.frombuffer(r.take(ww * (nsub + 1)), dtype=f"<u{ww}").tolist()
        rest = r.rest()
        bank, off = HashBank.from_bytes(rest, 0)
        if len(bank) != bank_size or any(c.table_size != slot_range for c in bank.candidates):
            raise CorruptFile("hash bank does not match the layout")
        plen = packed_len(npay, spec.k)
        payload = unpack_words(rest[off:off + plen], npay, spec.k).tolist()
        off += plen
        rec = 16 + vb
        if len(rest) - off != rec * nbad:
            raise CorruptFile("bad-key table length mismatch")
        bad_d, bad_v = [], []
        for i in range(nbad):
            chunk = rest[off + i * rec: off + (i + 1) * rec]
            bad_d.append(bytes(chunk[:16]))
            bad_v.append(int.from_bytes(chunk[16:], "little"))
        if sub_words and (sub_words[-1] >> 8) != npay:
            raise CorruptFile("sub-bucket sentinel does not match the payload length")
        return cls(spec, params, n, h1, split_seed, bank, bucket_words, sub_words, payload, bad_d, bad_v)


TIER_HEADER_BYTES = struct.calcsize("<QQQQQQQQQBQQQB")


def split_hash(split_seed: int, bucket: int, choice: int, q: int) -> PairwiseHash:
    return pairwise_new(derive_seed("tier.split", split_seed, bucket, choice), q)


def tiered_bits(d: TieredDict) -> tuple[int, int, int]:
    payload_bits = len(d.payload) * d.spec.k
    vb = (d.spec.k + 7) // 8
    bank_bytes = 4 + sum(PairwiseHash.SIZE + 9 + c.table_size * c.value_width()
                         for c in d.bank.candidates)
    overhead_bytes = (TIER_HEADER_BYTES + FIELD_BYTES + PairwiseHash.SIZE
                      + 8 * len(d.bucket_words)
                      + d.word_width() * len(d.sub_words)
                      + bank_bytes
                      + (16 + vb) * len(d.bad_digests))
    overhead = 8 * overhead_bytes
    return payload_bits, overhead, payload_bits + overhead


def first_level(xs: list[int], params: LayoutParams, aseed: int, threshold: float):
    """Draw h1 until the bad buckets hold at most ``threshold`` keys.

    Returns (h1, buckets, draws); h1 is None when MAX_H1_DRAWS draws all fail.
    """
    for draw in range(1, MAX_H1_DRAWS + 1):
        h1 = pairwise_new(derive_seed("tier.h1", aseed, draw - 1), params.bucket_count)
        if xs:
            ids = pairwise_eval_many(h1.a, h1.b, h1.range, np.array(xs, dtype=np.uint64))
            loads = np.bincount(ids.astype(np.intp), minlength=params.bucket_count)
        else:
            ids = np.zeros(0, dtype=np.intp)
            loads = np.zeros(params.bucket_count, dtype=np.intp)
        bad_keys = int(loads[loads > params.bad_bucket_capacity].sum())
        if bad_keys <= threshold:
            buckets: list[list[int]] = [[] for _ in range(params.bucket_count)]
            for idx, b in enumerate(ids.tolist()):
                buckets[b].append(idx)
            return h1, buckets, draw
    return None, None, MAX_H1_DRAWS


class _Retry(Exception):
    def __init__(self, stage: str):
        self.stage = stage


def _solve_sub_bucket(members, xs, values, bank, cache, slot_range, stats):
    """Pick the candidate for one sub-bucket and solve it.  Returns (variant, b)."""
    sxs = [xs[i] for i in members]
    start = 0
    while True:
        v = select_bucket_hash(sxs, bank, slot_range, start=start)
        inner = bank.candidates[v].inner
        a, b = inner.a, inner.b
        slots = [((a * x + b) % P61) % slot_range for x in sxs]
        order = sorted(range(len(members)), key=slots.__getitem__)
        key = MatrixCacheKey(tuple(slots[o] for o in order), v)
        rhs = [values[members[o]] for o in order]
        try:
            return v, matrix_cache_solve(cache, key, rhs)
        except SingularSubMatrix:
            stats["singular_sub"] += 1
            start = v + 1
            if start >= len(bank):
                raise NoGoodFunction("every candidate was singular or colliding") from None


def build_tiered_from_digests(items: list[tuple[bytes, int]], spec: FieldSpec,
                              params: LayoutParams | None = None, seed: int = 0,
                              max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                              use_cache: bool = True) -> tuple[TieredDict, BuildReport]:
    n = len(items)
    params = params or plan_layout(n, spec.k)
    xs = [digest_x(d) for d, _ in items]
    values = [v for _, v in items]
    threshold = bad_key_threshold(n)
    fits = params.keys_per_sub_bucket
    stats = {"h1_draws": 0, "split_redraws": 0, "singular_sub": 0, "stage_failures": {}}
    for attempt in range(1, max_attempts + 1):
        aseed = derive_seed("tier.attempt", seed, attempt)
        h1, buckets, draws = first_level(xs, params, aseed, threshold)
        stats["h1_draws"] += draws
        if h1 is None:
            stats["stage_failures"]["h1"] = stats["stage_failures"].get("h1", 0) + 1
            continue
        bank = bank_new(derive_seed("tier.bank", aseed), params.bank_size, params.slot_range)
        coef = coefficient_table(spec, bank, params.sub_bucket_capacity)
        cache = MatrixCache(spec, coef, params.sub_slack, enabled=use_cache)
        split_seed = derive_seed("tier.split-root", aseed)
        bucket_words, sub_words, payload, chosen = [], [], [], []
        bad_members: list[int] = []
        try:
            for i, members in enumerate(buckets):
                if len(members) > params.bad_bucket_capacity or n == 0:
                    # an empty dictionary stores nothing at all: its one bucket is an empty bad bucket
                    bad_members.extend(members)
                    bucket_words.append(len(sub_words) << 24)
                    continue
                # a bucket that already fits is kept whole; larger ones get ceil(B / s) parts
                q = 1 if len(members) <= fits else math.ceil(len(members) / params.s)
                if q > 0xFFFF:
                    raise _Retry("split")
                for choice in range(MAX_SPLIT_DRAWS):
                    sh = split_hash(split_seed, i, choice, q)
                    groups: list[list[int]] = [[] for _ in range(q)]
                    for idx in members:
                        groups[sh.eval_x(xs[idx])].append(idx)
                    if max(len(g) for g in groups) <= fits:
                        break
                    stats["split_redraws"] += 1
                else:
                    raise _Retry("split")
                bucket_words.append((len(sub_words) << 24) | (q << 8) | choice)
                for grp in groups:
                    v, b = _solve_sub_bucket(grp, xs, values, bank, cache, params.slot_range, stats)
                    sub_words.append((len(payload) << 8) | v)
                    chosen.append(v)
                    payload.extend(b)
        except _Retry as exc:
            stats["stage_failures"][exc.stage] = stats["stage_failures"].get(exc.stage, 0) + 1
            continue
        except NoGoodFunction:
            stats["stage_failures"]["bank"] = stats["stage_failures"].get("bank", 0) + 1
            continue
        sub_words.append(len(payload) << 8)
        bank.chosen = chosen
        bad = sorted((items[i][0], items[i][1]) for i in bad_members)
        d = TieredDict(spec, params, n, h1, split_seed, bank, bucket_words, sub_words, payload,
                       [dg for dg, _ in bad], [v for _, v in bad])
        _post_check(d, items)
        pbits, obits, tbits = tiered_bits(d)
        extra = dict(stats, mode="tiered", n=n, bad_keys=len(bad), cache_hits=cache.hits,
                     cache_misses=cache.misses, sub_buckets=d.sub_bucket_count,
                     bits_overhead=obits, bits_per_key=tbits / n if n else 0.0,
                     layout=asdict(params))
        report = BuildReport(attempts=attempt, final_seed=aseed, m=len(payload),
                             bits_payload=pbits, bits_total=tbits, extra=extra)
        return d, report
    stages = stats["stage_failures"]
    stage = max(stages, key=stages.get) if stages else "unknown"
    raise BuildFailed(stage, max_attempts, f"failures per stage: {stages}")


def build_tiered(pairs, k: int, params: LayoutParams | None = None, seed: int = 0,
                 max_attempts: int = DEFAULT_MAX_ATTEMPTS, use_cache: bool = True,
                 **overrides) -> tuple[TieredDict, BuildReport]:
    spec = default_spec(k)
    items = canonical_pairs(pairs, k)
    if params is None:
        params = plan_layout(len(items), k, **overrides)
    elif overrides:
        params = replace(params, **overrides)
    return build_tiered_from_digests(items, spec, params, seed, max_attempts, use_cache)


def query_tiered(d: TieredDict, key: bytes | str) -> int:
    return d.query(key)


def probe_count(d: TieredDict, key: bytes | str) -> int:
    return d.probe_count(key_digest(key))


def _post_check(d: TieredDict, items):
    if not items:
        return
    digs = np.frombuffer(b"".join(dg for dg, _ in items), dtype=np.uint8).reshape(-1, 16)
    got = d.query_many(digs)
    want = np.array([v for _, v in items], dtype=np.uint64)
    if not np.array_equal(got, want):
        bad = int(np.count_nonzero(got != want))
        raise AssertionError(f"tiered build failed its exhaustive check on {bad} keys")


__all__ = [
    "LayoutParams", "plan_layout", "TieredDict", "MatrixCache", "MatrixCacheKey",
    "matrix_cache_solve", "solution_operator", "coefficient_table", "build_tiered",
    "build_tiered_from_digests", "query_tiered", "probe_count", "tiered_bits",
    "bad_key_threshold", "split_hash",
]
