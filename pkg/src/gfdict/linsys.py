"""Equation sets over GF(2^k): sampling, rank, and exact solving.

Dense systems are solved by Gaussian elimination (first nonzero pivot in
column order) on numpy arrays.  Sparse systems are first peeled: a column
touched by exactly one remaining row pins that row, which is removed and
back-substituted at the end.  Whatever survives peeling (the 2-core) is
handed to the dense eliminator.  This has the same contract as the
Wiedemann-style solvers but not their asymptotics.

Free variables are always set to zero.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, Singular, SystemTooLarge
from .field import FieldElem, FieldSpec, fe_inv, fe_mul, mul_vec

# Largest dense block (rows or columns) the eliminator accepts by default.
DEFAULT_MAX_DENSE = 4096


@dataclass(frozen=True)
class DenseRow:
    coeffs: np.ndarray

    def __len__(self):
        return len(self.coeffs)


@dataclass(frozen=True)
class SparseRow:
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev = -1
        for idx, coeff in self.entries:
            if idx <= prev:
                raise ValueError("sparse row indices must be strictly increasing")
            if coeff == 0:
                raise ValueError("sparse row coefficients must be nonzero")
            prev = idx

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    def to_dense(self, m: int, spec: FieldSpec) -> np.ndarray:
        out = np.zeros(m, dtype=spec.dtype)
        for i, c in self.entries:
            out[i] = c
        return out


Row = Union[DenseRow, SparseRow]


@dataclass
class LinearSystem:
    spec: FieldSpec
    m: int
    rows: list[Row]
    rhs: list[FieldElem]

    def __post_init__(self):
        if len(self.rows) != len(self.rhs):
            raise DimensionMismatch(f"{len(self.rows)} rows but {len(self.rhs)} right-hand sides")
        for r in self.rows:
            if isinstance(r, DenseRow):
                if len(r.coeffs) != self.m:
                    raise DimensionMismatch(f"dense row of length {len(r.coeffs)} in a system with m={self.m}")
            elif r.entries and r.entries[-1][0] >= self.m:
                raise DimensionMismatch(f"sparse row index {r.entries[-1][0]} >= m={self.m}")

    def dense_matrix(self) -> np.ndarray:
        mat = np.zeros((len(self.rows), self.m), dtype=self.spec.dtype)
        for i, r in enumerate(self.rows):
            if isinstance(r, DenseRow):
                mat[i] = r.coeffs
            else:
                for j, c in r.entries:
                    mat[i, j] = c
        return mat

    def verify(self, b: Sequence[FieldElem]) -> bool:
        """True iff ``b`` satisfies every equation."""
        spec = self.spec
        for r, d in zip(self.rows, self.rhs):
            if isinstance(r, DenseRow):
                acc = 0
                for c, x in zip(r.coeffs.tolist(), b):
                    if c and x:
                        acc ^= fe_mul(spec, c, x)
            else:
                acc = 0
                for j, c in r.entries:
                    acc ^= fe_mul(spec, c, b[j])
            if acc != d:
                return False
        return True


# --- dense elimination ---------------------------------------------------------

def _forward(spec: FieldSpec, mat: np.ndarray, rhs: np.ndarray | None):
    """Row-echelon form in place with unit pivots.  Returns (rank, pivot columns)."""
    nrows, ncols = mat.shape
    row = 0
    pivots = []
    t = spec.tables
    tbl = None
    if t is not None and t.mul_np is not None:
        tbl = t.mul_np.reshape(spec.order, spec.order)
    for col in range(ncols):
        if row == nrows:
            break
        nz = np.flatnonzero(mat[row:, col])
        if nz.size == 0:
            continue
        p = row + int(nz[0])
        if p != row:
            mat[[row, p]] = mat[[p, row]]
            if rhs is not None:
                rhs[[row, p]] = rhs[[p, row]]
        piv = int(mat[row, col])
        if piv != 1:
            inv = fe_inv(spec, piv)
            mat[row, col:] = mul_vec(spec, mat[row, col:], inv)
            if rhs is not None:
                rhs[row] = fe_mul(spec, int(rhs[row]), inv)
        below = row + 1 + np.flatnonzero(mat[row + 1:, col])
        if below.size:
            f = mat[below, col]
            if tbl is not None:
                # all 2^k multiples of the pivot row, then one row gather
                multiples = tbl[:, mat[row, col:]]
                mat[below, col:] ^= multiples[f]
            else:
                mat[below, col:] ^= mul_vec(spec, f[:, None], mat[row, col:][None, :])
            if rhs is not None:
                rhs[below] ^= mul_vec(spec, f, rhs[row])
        pivots.append(col)
        row += 1
    return row, pivots


def _check_size(nrows: int, ncols: int, limit: int | None):
    if limit is not None and max(nrows, ncols) > limit:
        raise SystemTooLarge(
            f"dense elimination on a {nrows}x{ncols} block exceeds the limit of {limit}")


def dense_rank(spec: FieldSpec, mat: np.ndarray) -> int:
    work = np.array(mat, dtype=spec.dtype, copy=True)
    if work.size == 0:
        return 0
    rank, _ = _forward(spec, work, None)
    return rank


def dense_solve(spec: FieldSpec, mat: np.ndarray, rhs: Sequence[int], require_full_rank: bool = True):
    """Solve ``mat @ b = rhs``; returns (b as uint64 array, rank).

    Raises Singular when the rows are dependent (or, with
    ``require_full_rank=False``, only when the system is inconsistent).
    """
    nrows, ncols = mat.shape
    work = np.array(mat, dtype=spec.dtype, copy=True)
    r = np.array(rhs, dtype=spec.dtype)
    if nrows == 0:
        return np.zeros(ncols, dtype=np.uint64), 0
    rank, pivots = _forward(spec, work, r)
    consistent = not np.any(r[rank:])
    if rank < nrows and (require_full_rank or not consistent):
        raise Singular(rank, nrows, consistent)
    b = np.zeros(ncols, dtype=spec.dtype)
    for i in range(rank - 1, -1, -1):
        c = pivots[i]
        tail = work[i, c + 1:]
        acc = int(r[i])
        nz = np.flatnonzero(tail)
        if nz.size:
            acc ^= int(np.bitwise_xor.reduce(mul_vec(spec, tail[nz], b[c + 1:][nz])))
        b[c] = acc
    return b.astype(np.uint64), rank


# --- public solver API -----------------------------------------------------------

def _is_sparse(sys: LinearSystem) -> bool:
    return bool(sys.rows) and isinstance(sys.rows[0], SparseRow)


def solve_dense(sys: LinearSystem, require_full_rank: bool = True,
                max_dense: int | None = DEFAULT_MAX_DENSE) -> list[FieldElem]:
    _check_size(len(sys.rows), sys.m, max_dense)
    b, _ = dense_solve(sys.spec, sys.dense_matrix(), sys.rhs, require_full_rank)
    return [int(x) for x in b]


def _peel(sys: LinearSystem):
    """Peel degree-1 columns.  Returns (peel order [(row, col)], core row ids)."""
    m = sys.m
    rows = sys.rows
    col_rows: list[list[int]] = [[] for _ in range(m)]
    for ri, r in enumerate(rows):
        for j, _ in r.entries:
            col_rows[j].append(ri)
    deg = [len(c) for c in col_rows]
    active = [True] * len(rows)
    stack = [c for c in range(m) if deg[c] == 1]
    order = []
    while stack:
        c = stack.pop()
        if deg[c] != 1:
            continue
        for ri in col_rows[c]:
            if active[ri]:
                break
        active[ri] = False
        order.append((ri, c))
        for j, _ in rows[ri].entries:
            deg[j] -= 1
            if deg[j] == 1:
                stack.append(j)
    core = [ri for ri, a in enumerate(active) if a]
    return order, core


def _core_matrix(sys: LinearSystem, core: list[int]):
    cols = sorted({j for ri in core for j, _ in sys.rows[ri].entries})
    where = {c: i for i, c in enumerate(cols)}
    mat = np.zeros((len(core), len(cols)), dtype=sys.spec.dtype)
    for i, ri in enumerate(core):
        for j, c in sys.rows[ri].entries:
            mat[i, where[j]] = c
    return mat, cols


def solve_sparse(sys: LinearSystem, require_full_rank: bool = True,
                 max_dense: int | None = DEFAULT_MAX_DENSE) -> list[FieldElem]:
    spec = sys.spec
    order, core = _peel(sys)
    b = [0] * sys.m
    if core:
        mat, cols = _core_matrix(sys, core)
        if require_full_rank and len(core) > len(cols):
            # more equations than live variables: dependent for sure
            raise Singular(len(order) + len(cols), len(sys.rows), None)
        _check_size(len(core), len(cols), max_dense)
        try:
            sol, _ = dense_solve(spec, mat, [sys.rhs[ri] for ri in core], require_full_rank)
        except Singular as exc:
            raise Singular(len(order) + exc.rank, len(sys.rows), exc.consistent) from None
        for c, v in zip(cols, sol.tolist()):
            b[c] = v
    rows, rhs = sys.rows, sys.rhs
    for ri, c in reversed(order):
        acc = rhs[ri]
        pivot = 0
        for j, a in rows[ri].entries:
            if j == c:
                pivot = a
            elif b[j]:
                acc ^= fe_mul(spec, a, b[j])
        b[c] = acc if pivot == 1 else fe_mul(spec, acc, fe_inv(spec, pivot))
    return b


def solve(sys: LinearSystem, require_full_rank: bool = True,
          max_dense: int | None = DEFAULT_MAX_DENSE) -> list[FieldElem]:
    if _is_sparse(sys):
        return solve_sparse(sys, require_full_rank, max_dense)
    return solve_dense(sys, require_full_rank, max_dense)


def rank(sys: LinearSystem, max_dense: int | None = DEFAULT_MAX_DENSE) -> int:
    """Rank of the coefficient matrix; equals len(rows) iff the set is independent."""
    if not sys.rows:
        return 0
    if _is_sparse(sys):
        order, core = _peel(sys)
        if not core:
            return len(order)
        mat, cols = _core_matrix(sys, core)
        _check_size(len(core), len(cols), max_dense)
        return len(order) + dense_rank(sys.spec, mat)
    _check_size(len(sys.rows), sys.m, max_dense)
    return dense_rank(sys.spec, sys.dense_matrix())


# --- probability and counting formulas -----------------------------------------------

def independence_bound(k: int, c: int) -> float:
    """Lower bound on Pr[n random rows over n + c variables are independent]."""
    bound = 1.0 - 1.0 / (2.0 ** (k * c) * (2.0 ** k - 1.0))
    return min(1.0, max(0.0, bound))


def expected_empty_cells(m: int, t: int, n: int) -> float:
    """Expected number of variables untouched by n random t-sparse rows over m variables."""
    return m * (1.0 - 1.0 / m) ** (t * n)


def min_variables(t: int, n: int) -> int:
    return math.ceil(n * (1.0 + math.exp(-t)))


def used_variables(m: int, t: int, n: int) -> float:
    """Expected number of variables that appear in at least one row."""
    return m * (1.0 - math.exp(-t * n / m))


# --- row sampling --------------------------------------------------------------

_WORD_DTYPES = {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}


def _word_bytes(k: int) -> int:
    for w in (1, 2, 4, 8):
        if k <= 8 * w:
            return w
    raise AssertionError(k)


class ByteStream:
    """Deterministic byte stream: SHAKE-256 of a tagged input, extended on demand."""

    def __init__(self, material: bytes, chunk: int = 64):
        self._xof = hashlib.shake_256(material)
        self._buf = self._xof.digest(chunk)
        self._pos = 0

    def read_u64(self) -> int:
        if self._pos + 8 > len(self._buf):
            self._buf = self._xof.digest(2 * len(self._buf))
        v = int.from_bytes(self._buf[self._pos:self._pos + 8], "little")
        self._pos += 8
        return v

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling."""
        if n <= 1:
            return 0
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.read_u64()
            if v < limit:
                return v % n

    def nonzero(self, mask: int) -> int:
        if mask == 1:
            return 1
        while True:
            v = self.read_u64() & mask
            if v:
                return v


def _material(tag: bytes, spec: FieldSpec, m: int, seed: int, digest: bytes, extra: bytes = b"") -> bytes:
    return b"gfdict/" + tag + struct.pack("<HQQ", spec.k, m, seed & 0xFFFFFFFFFFFFFFFF) + extra + digest


def sample_dense_row(spec: FieldSpec, m: int, key_digest: bytes, seed: int) -> DenseRow:
    w = _word_bytes(spec.k)
    raw = hashlib.shake_256(_material(b"dense", spec, m, seed, key_digest)).digest(m * w)
    coeffs = np.frombuffer(raw, dtype=_WORD_DTYPES[w]).astype(spec.dtype)
    if spec.k % 8:
        coeffs &= spec.dtype(spec.mask)
    return DenseRow(coeffs)


def sample_sparse_row(spec: FieldSpec, m: int, t: int, locality_window: int | None,
                      key_digest: bytes, seed: int) -> SparseRow:
    if t > m:
        raise ValueError(f"t={t} exceeds m={m}")
    width = m
    if locality_window is not None:
        if not t <= locality_window <= m:
            raise ValueError(f"locality window {locality_window} must lie in [t, m] = [{t}, {m}]")
        width = locality_window
    extra = struct.pack("<II", t, locality_window or 0)
    stream = ByteStream(_material(b"sparse", spec, m, seed, key_digest, extra))
    start = stream.below(m - width + 1) if width < m else 0
    if 2 * t > width:
        # partial Fisher-Yates over the window
        pool = list(range(width))
        for i in range(t):
            j = i + stream.below(width - i)
            pool[i], pool[j] = pool[j], pool[i]
        chosen = pool[:t]
    else:
        seen: set[int] = set()
        chosen = []
        while len(chosen) < t:
            v = stream.below(width)
            if v not in seen:
                seen.add(v)
                chosen.append(v)
    mask = spec.mask
    coeffs = [stream.nonzero(mask) for _ in range(t)]
    entries = tuple(sorted((start + i, c) for i, c in zip(chosen, coeffs)))
    return SparseRow(entries)


__all__ = [
    "DenseRow", "SparseRow", "LinearSystem", "DEFAULT_MAX_DENSE", "ByteStream",
    "solve", "solve_dense", "solve_sparse", "rank", "dense_rank", "dense_solve",
    "independence_bound", "expected_empty_cells", "min_variables", "used_variables",
    "sample_dense_row", "sample_sparse_row",
]
