"""Measured false-positive rate of membership filters against 2^-k."""

from __future__ import annotations

import argparse
import json
import math
import sys

from gfdict.member import fpr_measure, member_build


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--ks", type=int, nargs="+", default=[1, 2, 4, 8, 12, 16])
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    keys = [f"fpr-{i}" for i in range(args.n)]
    for k in args.ks:
        f, report = member_build(keys, k, seed=args.seed)
        res = fpr_measure(f, args.trials, seed=args.seed)
        expect = 2.0 ** -k
        sigma = math.sqrt(expect * (1 - expect) / res.trials)
        print(json.dumps({
            "k": k, "n": args.n, "backend": report.extra["backend"], "trials": res.trials,
            "fpr": res.rate, "ci95": res.ci95, "expected": expect,
            "z": (res.rate - expect) / sigma, "bits_per_key": report.extra["bits_per_key"],
        }), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
