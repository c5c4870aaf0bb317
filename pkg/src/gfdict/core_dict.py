"""Single-system dictionary: one equation per key, one solve.

Every key x gets a row r(x) over m variables and we solve r(x_i) . b = d_i.
The payload is the solution b (m words of k bits); a query recomputes r(x)
and returns r(x) . b.  Three row shapes are supported:

* ``dense``  - m = n + slack, every coordinate random;
* ``sparse`` - t random nonzero coordinates (optionally inside a window),
  m = max(ceil(n (1 + e^-t)), n + slack);
* ``pure``   - m = n exactly with t = ceil(ln n).

A singular system is answered by re-drawing the rows with a fresh seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import BuildFailed, DuplicateKey, Singular, SystemTooLarge, ValueOutOfRange
from .field import FieldSpec, default_spec, dot_vec, fe_mul
from .hashfam import derive_seed, key_digest
from .linsys import (
    DEFAULT_MAX_DENSE, DenseRow, LinearSystem, SparseRow, min_variables,
    sample_dense_row, sample_sparse_row, solve,
)

MODES = ("dense", "sparse", "pure")
DEFAULT_MAX_ATTEMPTS = 16
DEFAULT_WINDOW = 256
MAX_PURE_N = 4096


@dataclass
class BuildReport:
    attempts: int
    final_seed: int
    m: int
    bits_payload: int
    bits_total: int
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "attempts": self.attempts,
            "final_seed": self.final_seed,
            "m": self.m,
            "bits_payload": self.bits_payload,
            "bits_total": self.bits_total,
        }
        d.update(self.extra)
        return d


def canonical_pairs(pairs: Iterable[tuple[bytes | str, int]], k: int) -> list[tuple[bytes, int]]:
    """Digest keys, check values, collapse exact duplicates, sort by digest."""
    limit = 1 << k
    seen: dict[bytes, int] = {}
    for key, value in pairs:
        value = int(value)
        if not 0 <= value < limit:
            raise ValueOutOfRange(f"value {value} for key {key!r} does not fit in {k} bits")
        d = key_digest(key)
        prev = seen.get(d)
        if prev is None:
            seen[d] = value
        elif prev != value:
            raise DuplicateKey(key)
    return sorted(seen.items())


def pure_sparsity(n: int) -> int:
    return max(1, math.ceil(math.log(n))) if n > 1 else 1


@dataclass(frozen=True)
class RowRule:
    """Everything needed to regenerate the row of any key."""

    mode: str
    m: int
    t: int
    window: int | None
    seed: int

    def row(self, spec: FieldSpec, digest: bytes):
        if self.mode == "dense":
            return sample_dense_row(spec, self.m, digest, self.seed)
        return sample_sparse_row(spec, self.m, self.t, self.window, digest, self.seed)


@dataclass
class CoreDict:
    spec: FieldSpec
    rule: RowRule
    b: list[int]
    n: int = 0

    @property
    def mode(self) -> str:
        return self.rule.mode

    @property
    def m(self) -> int:
        return self.rule.m

    @property
    def seed(self) -> int:
        return self.rule.seed

    def query_digest(self, digest: bytes) -> int:
        if self.m == 0:
            return 0
        row = self.rule.row(self.spec, digest)
        if isinstance(row, DenseRow):
            return int(dot_vec(self.spec, row.coeffs, np.asarray(self._b_np)))
        spec, b = self.spec, self.b
        acc = 0
        for j, c in row.entries:
            acc ^= fe_mul(spec, c, b[j])
        return acc

    def query(self, key: bytes | str) -> int:
        return self.query_digest(key_digest(key))

    def words_touched(self, digest: bytes) -> int:
        """Distinct payload words read by a query for ``digest``."""
        if self.m == 0:
            return 0
        if self.mode == "dense":
            return self.m
        return len(self.rule.row(self.spec, digest).entries)

    @property
    def _b_np(self) -> np.ndarray:
        cached = self.__dict__.get("_b_cache")
        if cached is None:
            cached = np.array(self.b, dtype=self.spec.dtype)
            self.__dict__["_b_cache"] = cached
        return cached


# serialized CORE header: m u64, t u32, window u32, seed u64, n u64, mode u8
CORE_HEADER_BYTES = 8 + 4 + 4 + 8 + 8 + 1
# FLDS section: k u16 + poly u128
FIELD_BYTES = 2 + 16


def core_bits(d: CoreDict) -> tuple[int, int]:
    payload = d.m * d.spec.k
    return payload, payload + 8 * (CORE_HEADER_BYTES + FIELD_BYTES)


def _variable_count(mode: str, n: int, t: int, slack: int) -> tuple[int, int]:
    if mode == "dense":
        return n + slack, 0
    if mode == "pure":
        return n, pure_sparsity(n)
    if n == 0:
        return 0, t
    m = max(min_variables(t, n), n + slack, t)
    return m, t


def build_from_digests(items: list[tuple[bytes, int]], spec: FieldSpec, mode: str = "dense",
                       t: int = 3, slack: int = 0, seed: int = 0,
                       max_attempts: int = DEFAULT_MAX_ATTEMPTS, window: int | None = None,
                       max_dense: int | None = DEFAULT_MAX_DENSE,
                       max_pure_n: int | None = MAX_PURE_N) -> tuple[CoreDict, BuildReport]:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = len(items)
    if mode == "pure" and max_pure_n is not None and n > max_pure_n:
        raise SystemTooLarge(f"pure mode is limited to n <= {max_pure_n} (got {n})")
    m, t = _variable_count(mode, n, t, slack)
    if mode == "dense" and max_dense is not None and max(n, m) > max_dense:
        # refuse before materialising an n x m matrix
        raise SystemTooLarge(f"dense {n} x {m} system exceeds max_dense={max_dense}")
    if mode == "dense":
        window = None
    elif window is not None:
        window = min(max(window, t), m)
    values = [v for _, v in items]
    failures = []
    for attempt in range(1, max_attempts + 1):
        aseed = derive_seed("core.attempt", seed, attempt)
        rule = RowRule(mode, m, t, window, aseed)
        if n == 0:
            b = [0] * m
        else:
            rows = [rule.row(spec, dg) for dg, _ in items]
            system = LinearSystem(spec, m, rows, values)
            try:
                b = solve(system, max_dense=max_dense)
            except Singular as exc:
                failures.append(exc.rank)
                continue
            _post_check(spec, rows, b, values)
        d = CoreDict(spec, rule, b, n)
        payload, total = core_bits(d)
        report = BuildReport(attempts=attempt, final_seed=aseed, m=m, bits_payload=payload,
                             bits_total=total, extra={"mode": mode, "t": t, "n": n,
                                                      "bits_per_key": total / n if n else 0.0})
        return d, report
    raise BuildFailed("solve", max_attempts, f"ranks of failed attempts: {failures}")


def build_core(pairs, k: int, mode: str = "dense", slack: int = 0, seed: int = 0,
               max_attempts: int = DEFAULT_MAX_ATTEMPTS, t: int = 3, window: int | None = None,
               **kwargs) -> tuple[CoreDict, BuildReport]:
    spec = default_spec(k)
    items = canonical_pairs(pairs, k)
    return build_from_digests(items, spec, mode=mode, t=t, slack=slack, seed=seed,
                              max_attempts=max_attempts, window=window, **kwargs)


def query_core(d: CoreDict, key: bytes | str) -> int:
    return d.query(key)


def _post_check(spec: FieldSpec, rows, b: list[int], values: list[int]):
    if isinstance(rows[0], SparseRow):
        for r, v in zip(rows, values):
            acc = 0
            for j, c in r.entries:
                acc ^= fe_mul(spec, c, b[j])
            if acc != v:
                raise AssertionError("solver returned a vector that misses an equation")
        return
    bv = np.array(b, dtype=spec.dtype)
    for lo in range(0, len(rows), 256):
        block = np.stack([r.coeffs for r in rows[lo:lo + 256]])
        got = dot_vec(spec, block, bv[None, :])
        if not np.array_equal(got.astype(np.uint64), np.array(values[lo:lo + 256], dtype=np.uint64)):
            raise AssertionError("solver returned a vector that misses an equation")


__all__ = [
    "MODES", "BuildReport", "CoreDict", "RowRule", "build_core", "build_from_digests",
    "query_core", "core_bits", "canonical_pairs", "pure_sparsity", "DEFAULT_WINDOW",
    "DEFAULT_MAX_ATTEMPTS", "MAX_PURE_N",
]
