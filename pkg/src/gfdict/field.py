"""Arithmetic in GF(2^k), 1 <= k <= 64.

Elements are plain Python ints below ``2**k``, read as polynomials over GF(2).
Scalar helpers (:func:`fe_add`, :func:`fe_mul`, ...) take the :class:`FieldSpec`
first.  The ``*_vec`` helpers are numpy-vectorised versions used by the solvers
and the batched query paths; they produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DivisionByZero, UnsupportedFieldWidth

FieldElem = int

MAX_K = 64

# Lexicographically smallest irreducible polynomial of each degree 1..64
# (bit k set).  k=8 is the AES polynomial x^8 + x^4 + x^3 + x + 1.
_POLYS = (
    0x2, 0x7, 0xb, 0x13,
    0x25, 0x43, 0x83, 0x11b,
    0x203, 0x409, 0x805, 0x1009,
    0x201b, 0x4021, 0x8003, 0x1002b,
    0x20009, 0x40009, 0x80027, 0x100009,
    0x200005, 0x400003, 0x800021, 0x100001b,
    0x2000009, 0x400001b, 0x8000027, 0x10000003,
    0x20000005, 0x40000003, 0x80000009, 0x10000008d,
    0x20000004b, 0x40000001b, 0x800000005, 0x1000000035,
    0x200000003f, 0x4000000063, 0x8000000011, 0x10000000039,
    0x20000000009, 0x40000000027, 0x80000000059, 0x100000000021,
    0x20000000001b, 0x400000000003, 0x800000000021, 0x100000000002d,
    0x2000000000071, 0x400000000001d, 0x800000000004b, 0x10000000000009,
    0x20000000000047, 0x4000000000007d, 0x80000000000047, 0x100000000000095,
    0x200000000000011, 0x400000000000063, 0x80000000000007b, 0x1000000000000003,
    0x2000000000000027, 0x4000000000000069, 0x8000000000000003, 0x1000000000000001b,
)

# log/exp tables are built up to this width
_TABLE_MAX_K = 16


@dataclass(frozen=True)
class FieldSpec:
    k: int
    poly: int
    _tables: "_Tables | None" = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not 1 <= self.k <= MAX_K:
            raise UnsupportedFieldWidth(f"k={self.k} is outside 1..{MAX_K}")
        if self.poly.bit_length() - 1 != self.k:
            raise ValueError(f"poly {self.poly:#x} does not have degree {self.k}")

    @property
    def mask(self) -> int:
        return (1 << self.k) - 1

    @property
    def order(self) -> int:
        return 1 << self.k

    @property
    def dtype(self):
        if self.k <= 8:
            return np.uint8
        if self.k <= 16:
            return np.uint16
        if self.k <= 32:
            return np.uint32
        return np.uint64

    @property
    def tables(self) -> "_Tables | None":
        if self.k > _TABLE_MAX_K:
            return None
        t = self._tables
        if t is None:
            t = _build_tables(self.k, self.poly)
            object.__setattr__(self, "_tables", t)
        return t


def default_spec(k: int) -> FieldSpec:
    """The canonical field for width ``k``."""
    if not isinstance(k, int) or not 1 <= k <= MAX_K:
        raise UnsupportedFieldWidth(f"k={k!r} is outside 1..{MAX_K}")
    return _default_spec(k)


@lru_cache(maxsize=None)
def _default_spec(k: int) -> FieldSpec:
    return FieldSpec(k, _POLYS[k - 1])


# --- polynomial helpers over GF(2) -------------------------------------------

def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2) polynomials."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def poly_mod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a and a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(poly: int) -> bool:
    """Rabin's irreducibility test for a GF(2) polynomial of degree >= 1."""
    k = poly.bit_length() - 1
    if k < 1:
        return False
    if k == 1:
        return True
    x = poly_mod(2, poly)

    def frob(e: int) -> int:
        # x^(2^e) mod poly
        r = x
        for _ in range(e):
            r = poly_mod(clmul(r, r), poly)
        return r

    if frob(k) != x:
        return False
    for p in _prime_factors(k):
        if _poly_gcd(poly, frob(k // p) ^ x) != 1:
            return False
    return True


# --- tables --------------------------------------------------------------------

@dataclass(frozen=True)
class _Tables:
    exp: list[int]        # length 2*(q-1), exp[i] = g^i
    log: list[int]        # log[0] unused
    inv: list[int]
    exp_np: np.ndarray
    log_np: np.ndarray
    mul_np: np.ndarray | None   # flat (q*q) product table, k <= 8 only


def _slow_mul(a: int, b: int, k: int, poly: int) -> int:
    r = 0
    top = 1 << k
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & top:
            a ^= poly
    return r


def _build_tables(k: int, poly: int) -> _Tables:
    q = 1 << k
    order = q - 1
    factors = _prime_factors(order) if order > 1 else []
    gen = 1 if order == 1 else None
    for g in range(2, q):
        if gen is not None:
            break
        ok = True
        for p in factors:
            acc, base, e = 1, g, order // p
            while e:
                if e & 1:
                    acc = _slow_mul(acc, base, k, poly)
                base = _slow_mul(base, base, k, poly)
                e >>= 1
            if acc == 1:
                ok = False
                break
        if ok:
            gen = g
    exp = [0] * (2 * order)
    log = [0] * q
    v = 1
    for i in range(order):
        exp[i] = v
        exp[i + order] = v
        log[v] = i
        v = _slow_mul(v, gen, k, poly)
    inv = [0] * q
    for a in range(1, q):
        inv[a] = exp[(order - log[a]) % order]
    exp_np = np.array(exp, dtype=np.uint16 if k > 8 else np.uint8)
    log_np = np.array(log, dtype=np.int32)
    mul_np = None
    if k <= 8:
        a = np.arange(q)
        la = log_np[a][:, None] + log_np[a][None, :]
        prod = exp_np[la]
        prod[0, :] = 0
        prod[:, 0] = 0
        mul_np = prod.astype(np.uint8).reshape(-1)
    return _Tables(exp, log, inv, exp_np, log_np, mul_np)


# --- scalar operations -----------------------------------------------------------

def fe_add(a: FieldElem, b: FieldElem) -> FieldElem:
    return a ^ b


def fe_mul(spec: FieldSpec, a: FieldElem, b: FieldElem) -> FieldElem:
    t = spec.tables
    if t is not None:
        if a == 0 or b == 0:
            return 0
        return t.exp[t.log[a] + t.log[b]]
    return _slow_mul(a, b, spec.k, spec.poly)


def fe_pow(spec: FieldSpec, a: FieldElem, e: int) -> FieldElem:
    acc = 1
    while e:
        if e & 1:
            acc = fe_mul(spec, acc, a)
        a = fe_mul(spec, a, a)
        e >>= 1
    return acc


def fe_inv(spec: FieldSpec, a: FieldElem) -> FieldElem:
    """Inverse by raising to 2^k - 2."""
    if a == 0:
        raise DivisionByZero("0 has no multiplicative inverse")
    return fe_pow(spec, a, spec.order - 2)


def dot(spec: FieldSpec, row: Sequence[FieldElem], b: Sequence[FieldElem]) -> FieldElem:
    if len(row) != len(b):
        raise DimensionMismatch(f"row has {len(row)} entries, vector has {len(b)}")
    acc = 0
    t = spec.tables
    if t is not None:
        exp, log = t.exp, t.log
        for x, y in zip(row, b):
            if x and y:
                acc ^= exp[log[x] + log[y]]
        return acc
    k, poly = spec.k, spec.poly
    for x, y in zip(row, b):
        if x and y:
            acc ^= _slow_mul(x, y, k, poly)
    return acc


# --- vectorised operations ---------------------------------------------------

def mul_vec(spec: FieldSpec, a, b) -> np.ndarray:
    """Elementwise product of two broadcastable integer arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    t = spec.tables
    if t is not None and t.mul_np is not None:
        idx = (a.astype(np.intp) << spec.k) | b.astype(np.intp)
        return t.mul_np[idx]
    if t is not None:
        r = t.exp_np[t.log_np[a] + t.log_np[b]]
        return np.where((a == 0) | (b == 0), 0, r).astype(spec.dtype)
    return _shift_mul_vec(spec, a, b)


def _shift_mul_vec(spec: FieldSpec, a, b) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64))
    k = spec.k
    low = np.uint64(spec.poly & spec.mask)
    mask = np.uint64(spec.mask)
    one = np.uint64(1)
    r = np.zeros(a.shape, dtype=np.uint64)
    aa = a.copy()
    bb = b.copy()
    for _ in range(k):
        r ^= aa & (np.uint64(0) - (bb & one))
        carry = (aa >> np.uint64(k - 1)) & one
        aa = (aa << one) & mask
        aa ^= low & (np.uint64(0) - carry)
        bb >>= one
    return r.astype(spec.dtype)


def dot_vec(spec: FieldSpec, rows, b) -> np.ndarray:
    """Row-wise dot products: ``rows`` has shape (..., m), ``b`` broadcasts."""
    prod = mul_vec(spec, rows, b)
    return np.bitwise_xor.reduce(prod, axis=-1)


__all__ = [
    "FieldElem", "FieldSpec", "MAX_K", "default_spec", "is_irreducible",
    "clmul", "poly_mod", "fe_add", "fe_mul", "fe_pow", "fe_inv", "dot",
    "mul_vec", "dot_vec",
]
