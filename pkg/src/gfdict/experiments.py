"""Seeded Monte Carlo experiments shared by the acceptance suite and scripts/."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoGoodFunction, Singular
from .field import default_spec
from .hashfam import bank_new, default_bank_size, derive_seed, digests_x, is_injective, sim_uniform_new
from .linsys import LinearSystem, dense_solve, sample_dense_row, sample_sparse_row, solve_sparse
from .member import probe_digests


def seeded_digests(seed: int, n: int) -> list[bytes]:
    raw = probe_digests(derive_seed("exp.digests", seed), n)
    return [bytes(r) for r in raw]


@dataclass(frozen=True)
class Rate:
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def sigma(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("nan")


def dense_square_solvable(k: int, n: int, trials: int, seed: int = 0) -> Rate:
    """Fraction of random n x n systems (rows from sample_dense_row) that are independent."""
    spec = default_spec(k)
    ok = 0
    for trial in range(trials):
        tseed = derive_seed("exp.dense", seed, trial)
        digs = seeded_digests(tseed, n)
        mat = np.stack([sample_dense_row(spec, n, d, tseed).coeffs for d in digs])
        try:
            dense_solve(spec, mat, [0] * n)
            ok += 1
        except Singular:
            pass
    return Rate(ok, trials)


def sparse_solvable(k: int, n: int, m: int, t: int, trials: int, seed: int = 0,
                    window: int | None = None) -> Rate:
    """Fraction of random t-sparse n x m systems whose rows are independent."""
    spec = default_spec(k)
    ok = 0
    for trial in range(trials):
        tseed = derive_seed("exp.sparse", seed, trial)
        digs = seeded_digests(tseed, n)
        rows = [sample_sparse_row(spec, m, t, window, d, tseed) for d in digs]
        try:
            solve_sparse(LinearSystem(spec, m, rows, [0] * n), max_dense=None)
            ok += 1
        except Singular:
            pass
    return Rate(ok, trials)


def calibration_curve(n: int, ts, ratios, trials: int, k: int = 8, seed: int = 0) -> list[dict]:
    out = []
    for t in ts:
        for ratio in ratios:
            m = max(t, math.ceil(ratio * n))
            r = sparse_solvable(k, n, m, t, trials, seed)
            out.append({"n": n, "t": t, "m_over_n": ratio, "m": m, "trials": trials,
                        "success_rate": r.rate,
                        "formula_threshold": 1.0 + math.exp(-t)})
    return out


def injectivity_failure_rate(bucket: int, table_size: int, seeds: int, seed: int = 0) -> Rate:
    """Fraction of seeds whose simulated-uniform hash has a collision on ``bucket`` keys."""
    fails = 0
    for s in range(seeds):
        h = sim_uniform_new(derive_seed("exp.inject", seed, s), table_size)
        xs = digests_x(probe_digests(derive_seed("exp.inject-keys", seed, s), bucket)).tolist()
        if not is_injective(h.inner, xs, table_size):
            fails += 1
    return Rate(fails, seeds)


def bank_failure_rate(n: int, slot_range: int, runs: int, seed: int = 0,
                      bank_size: int | None = None) -> Rate:
    """Runs in which some bucket of <= sqrt(slot_range) keys finds no injective candidate."""
    bank_size = bank_size or default_bank_size(n)
    per_bucket = max(1, math.isqrt(slot_range))
    failed = 0
    for run in range(runs):
        bank = bank_new(derive_seed("exp.bank", seed, run), bank_size, slot_range)
        xs = digests_x(probe_digests(derive_seed("exp.bank-keys", seed, run), n)).tolist()
        try:
            for lo in range(0, n, per_bucket):
                chunk = xs[lo:lo + per_bucket]
                if not any(is_injective(c.inner, chunk, slot_range) for c in bank.candidates):
                    raise NoGoodFunction("no injective candidate")
        except NoGoodFunction:
            failed += 1
    return Rate(failed, runs)


def rate_dict(r: Rate) -> dict:
    return dict(asdict(r), rate=r.rate, sigma=r.sigma)


__all__ = [
    "Rate", "seeded_digests", "dense_square_solvable", "sparse_solvable", "calibration_curve",
    "injectivity_failure_rate", "bank_failure_rate", "rate_dict",
]
