"""Pairwise-independent hashing and the table-backed "simulated uniform" hash.

Keys are digested once (BLAKE2b, 16 bytes) and every hash function works on
the digest.  The pairwise family is ((a*x + b) mod p) mod r with the Mersenne
prime p = 2^61 - 1, where x is the first eight digest bytes (little endian)
reduced mod p.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyRange, NoGoodFunction
from .linsys import ByteStream

P61 = (1 << 61) - 1
DIGEST_SIZE = 16


def key_digest(key: bytes | str) -> bytes:
    if isinstance(key, str):
        key = key.encode("utf-8")
    return hashlib.blake2b(key, digest_size=DIGEST_SIZE).digest()


def digest_x(digest: bytes) -> int:
    """The integer a pairwise hash consumes."""
    return int.from_bytes(digest[:8], "little") % P61


def digests_x(digests: np.ndarray) -> np.ndarray:
    """Vector form of :func:`digest_x` for an (N, 16) uint8 array."""
    lo = np.ascontiguousarray(digests[:, :8]).view("<u8").reshape(-1).astype(np.uint64)
    return _reduce61(lo)


def derive_seed(tag: str, *parts: int) -> int:
    """64-bit seed for a named sub-stream; distinct tags never share a stream."""
    h = hashlib.blake2b(digest_size=8, person=b"gfdict-seed")
    h.update(tag.encode())
    for p in parts:
        h.update(b"|" + int(p).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def _seed_stream(seed: int, tag: bytes) -> ByteStream:
    return ByteStream(b"gfdict/hash/" + tag + struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))


# --- pairwise family ------------------------------------------------------------

@dataclass(frozen=True)
class PairwiseHash:
    a: int
    b: int
    range: int

    def __post_init__(self):
        if self.range < 1:
            raise EmptyRange("hash range must be >= 1")
        if not (1 <= self.a < P61 and 0 <= self.b < P61):
            raise ValueError("pairwise coefficients out of range")

    def eval_x(self, x: int) -> int:
        return ((self.a * x + self.b) % P61) % self.range

    def __call__(self, digest: bytes) -> int:
        return self.eval_x(digest_x(digest))

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        return pairwise_eval_many(self.a, self.b, self.range, xs)

    def to_bytes(self) -> bytes:
        return struct.pack("<QQQ", self.a, self.b, self.range)

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> "PairwiseHash":
        a, b, r = struct.unpack_from("<QQQ", buf, offset)
        return cls(a, b, r)

    SIZE = 24


def pairwise_new(seed: int, range: int) -> PairwiseHash:
    if range < 1:
        raise EmptyRange("hash range must be >= 1")
    stream = _seed_stream(seed, b"pairwise")
    a = 1 + stream.below(P61 - 1)
    b = stream.below(P61)
    return PairwiseHash(a, b, range)


def pairwise_eval(h: PairwiseHash, key_digest: bytes) -> int:
    return h(key_digest)


_M32 = np.uint64(0xFFFFFFFF)
_M29 = np.uint64((1 << 29) - 1)
_P = np.uint64(P61)


def _reduce61(v: np.ndarray) -> np.ndarray:
    v = (v & _P) + (v >> np.uint64(61))
    return v - np.where(v >= _P, _P, np.uint64(0))


def mulmod61(a, x) -> np.ndarray:
    """(a * x) mod 2^61-1 for uint64 arrays with entries < 2^61."""
    a = np.asarray(a, dtype=np.uint64)
    x = np.asarray(x, dtype=np.uint64)
    s32 = np.uint64(32)
    a1, a0 = a >> s32, a & _M32
    x1, x0 = x >> s32, x & _M32
    hi = (a1 * x1) << np.uint64(3)             # 2^64 = 8 (mod p)
    mid = a1 * x0 + a0 * x1                   # < 2^62
    mid_r = (mid >> np.uint64(29)) + ((mid & _M29) << s32)
    lo = _reduce61(a0 * x0)
    return _reduce61(_reduce61(hi + mid_r) + lo)


def pairwise_eval_many(a, b, range, xs: np.ndarray) -> np.ndarray:
    """Elementwise ((a*x + b) mod p) mod range; a, b, range may be arrays."""
    v = _reduce61(mulmod61(a, xs) + np.asarray(b, dtype=np.uint64))
    return v % np.asarray(range, dtype=np.uint64)


# --- simulated uniform hash -----------------------------------------------------------

@dataclass(frozen=True)
class SimUniformHash:
    inner: PairwiseHash
    table: np.ndarray = field(repr=False)
    value_range: int = 1 << 32

    @property
    def table_size(self) -> int:
        return self.inner.range

    def eval_x(self, x: int) -> int:
        return int(self.table[self.inner.eval_x(x)])

    def __call__(self, digest: bytes) -> int:
        return self.eval_x(digest_x(digest))

    def value_width(self) -> int:
        return max(1, (max(self.value_range - 1, 1).bit_length() + 7) // 8)

    def to_bytes(self) -> bytes:
        w = self.value_width()
        body = b"".join(int(v).to_bytes(w, "little") for v in self.table.tolist())
        return self.inner.to_bytes() + struct.pack("<QB", self.value_range, w) + body

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["SimUniformHash", int]:
        inner = PairwiseHash.from_bytes(buf, offset)
        offset += PairwiseHash.SIZE
        value_range, w = struct.unpack_from("<QB", buf, offset)
        offset += 9
        n = inner.range
        raw = buf[offset:offset + n * w]
        vals = np.array([int.from_bytes(raw[i * w:(i + 1) * w], "little") for i in range(n)],
                        dtype=np.uint64)
        return cls(inner, vals, value_range), offset + n * w


def sim_uniform_new(seed: int, table_size: int, value_range: int = 1 << 32) -> SimUniformHash:
    inner = pairwise_new(derive_seed("sim.inner", seed), table_size)
    stream = _seed_stream(derive_seed("sim.table", seed), b"table")
    vals = np.array([stream.below(value_range) for _ in range(table_size)], dtype=np.uint64)
    return SimUniformHash(inner, vals, value_range)


# --- candidate banks ---------------------------------------------------------

@dataclass
class HashBank:
    candidates: list[SimUniformHash]
    chosen: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.candidates)

    def to_bytes(self) -> bytes:
        parts = [struct.pack("<I", len(self.candidates))]
        parts += [c.to_bytes() for c in self.candidates]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["HashBank", int]:
        (count,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        cands = []
        for _ in range(count):
            c, offset = SimUniformHash.from_bytes(buf, offset)
            cands.append(c)
        return cls(cands), offset


def bank_new(seed: int, bank_size: int, table_size: int, value_range: int = 1 << 32) -> HashBank:
    return HashBank([sim_uniform_new(derive_seed("bank.candidate", seed, i), table_size, value_range)
                     for i in range(bank_size)])


def default_bank_size(n: int) -> int:
    return 2 * max(1, (max(n, 2) - 1).bit_length())


def is_injective(h: PairwiseHash, xs: Iterable[int], slot_range: int) -> bool:
    seen = set()
    a, b = h.a, h.b
    for x in xs:
        s = ((a * x + b) % P61) % slot_range
        if s in seen:
            return False
        seen.add(s)
    return True


def select_bucket_hash(bucket_keys: Sequence[bytes | int], bank: HashBank, slot_range: int,
                       start: int = 0) -> int:
    """Smallest candidate index >= ``start`` whose inner hash is injective on the keys."""
    if not bank.candidates:
        raise ValueError("empty hash bank")
    xs = [k if isinstance(k, int) else digest_x(k) for k in bucket_keys]
    for idx in range(start, len(bank.candidates)):
        if is_injective(bank.candidates[idx].inner, xs, slot_range):
            return idx
    raise NoGoodFunction(f"none of candidates {start}..{len(bank) - 1} is injective on {len(xs)} keys")


# --- a small fixed mixer ---------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def splitmix64_vec(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


__all__ = [
    "P61", "DIGEST_SIZE", "key_digest", "digest_x", "digests_x", "derive_seed",
    "PairwiseHash", "pairwise_new", "pairwise_eval", "pairwise_eval_many", "mulmod61",
    "SimUniformHash", "sim_uniform_new", "HashBank", "bank_new", "default_bank_size",
    "is_injective", "select_bucket_hash", "splitmix64", "splitmix64_vec",
]
