"""Membership filter: store a k-bit fingerprint of every key, compare on lookup.

The fingerprint g is a pairwise hash onto [0, 2^k) drawn from its own seed
domain, so it is independent of every hash used inside the dictionary.  A
stored key always matches; any other key matches with probability ~2^-k.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .core_dict import BuildReport, CoreDict, build_from_digests
from .errors import EmptyTrial
from .field import default_spec
from .hashfam import PairwiseHash, derive_seed, digests_x, key_digest, pairwise_new
from .tiered_dict import TieredDict, build_tiered_from_digests

TIERED_MIN_N = 4096
_U64_MAX = (1 << 64) - 1


def fingerprint_hash(seed: int, k: int) -> PairwiseHash:
    # the family's outputs are < 2^61 - 1, so clamping the range for k = 64 changes nothing
    return pairwise_new(derive_seed("memb.fingerprint", seed), min(1 << k, _U64_MAX))


@dataclass
class MemberFilter:
    dict: CoreDict | TieredDict
    g: PairwiseHash

    @property
    def k(self) -> int:
        return self.dict.spec.k

    def contains_digest(self, digest: bytes) -> bool:
        return self.dict.query_digest(digest) == self.g(digest)

    def __contains__(self, key) -> bool:
        return self.contains_digest(key_digest(key))

    def contains_many(self, digests: np.ndarray) -> np.ndarray:
        digests = np.asarray(digests, dtype=np.uint8).reshape(-1, 16)
        fp = self.g.eval_many(digests_x(digests))
        return query_values(self.dict, digests) == fp


def query_values(d: CoreDict | TieredDict, digests: np.ndarray) -> np.ndarray:
    """Batched dictionary lookups for an (N, 16) digest array."""
    if isinstance(d, TieredDict):
        return d.query_many(digests)
    return np.array([d.query_digest(bytes(row)) for row in digests], dtype=np.uint64)


def member_build(keys, k: int, backend: str | None = None, seed: int = 0,
                 mode: str = "dense", **kwargs) -> tuple[MemberFilter, BuildReport]:
    spec = default_spec(k)
    g = fingerprint_hash(seed, k)
    digests = sorted({key_digest(key) for key in keys})
    items = [(d, g(d)) for d in digests]
    if backend is None:
        backend = "tiered" if len(items) >= TIERED_MIN_N else "core"
    dict_seed = derive_seed("memb.dict", seed)
    if backend == "tiered":
        d, report = build_tiered_from_digests(items, spec, kwargs.pop("params", None), dict_seed, **kwargs)
    elif backend == "core":
        d, report = build_from_digests(items, spec, mode=mode, seed=dict_seed, **kwargs)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    report.extra["backend"] = backend
    return MemberFilter(d, g), report


def member_query(f: MemberFilter, key) -> bool:
    return key in f


@dataclass(frozen=True)
class FPRResult:
    trials: int
    hits: int
    rate: float
    ci95: tuple[float, float]


def probe_digests(seed: int, count: int, batch: int = 0) -> np.ndarray:
    """Pseudorandom 16-byte probe digests from a dedicated seed domain."""
    material = b"gfdict/probe" + struct.pack("<QQ", derive_seed("bench.probe", seed), batch)
    raw = hashlib.shake_256(material).digest(16 * count)
    return np.frombuffer(raw, dtype=np.uint8).reshape(count, 16)


def binomial_ci95(hits: int, trials: int) -> tuple[float, float]:
    ci = binomtest(hits, trials).proportion_ci(0.95, method="wilson")
    return float(ci.low), float(ci.high)


def fpr_measure(f: MemberFilter, trials: int, seed: int = 0, exclude: set[bytes] | None = None,
                batch: int = 1 << 16) -> FPRResult:
    """Empirical false-positive rate over ``trials`` fresh probe keys.

    Probes are random digests; they collide with a stored key with probability
    n / 2^128.  Pass ``exclude`` to drop known members anyway.
    """
    if trials < 1:
        raise EmptyTrial("need at least one trial")
    hits = done = used = 0
    b = 0
    while done < trials:
        count = min(batch, trials - done)
        probes = probe_digests(seed, count, b)
        if exclude:
            keep = [i for i in range(count) if bytes(probes[i]) not in exclude]
            probes = probes[keep]
        hits += int(np.count_nonzero(f.contains_many(probes)))
        used += len(probes)
        done += count
        b += 1
    if used == 0:
        raise EmptyTrial("every probe was excluded")
    return FPRResult(used, hits, hits / used, binomial_ci95(hits, used))


__all__ = [
    "MemberFilter", "member_build", "member_query", "fpr_measure", "FPRResult",
    "fingerprint_hash", "probe_digests", "binomial_ci95", "query_values", "TIERED_MIN_N",
]
