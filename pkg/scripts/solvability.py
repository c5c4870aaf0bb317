"""Dense square-system solvability against the independence bound and the GF(2) limit."""

from __future__ import annotations

import argparse
import json
import sys

from gfdict.experiments import dense_square_solvable
from gfdict.linsys import independence_bound


def gf2_limit(n: int) -> float:
    p = 1.0
    for i in range(1, n + 1):
        p *= 1 - 2.0 ** -i
    return p


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--ks", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    for k in args.ks:
        r = dense_square_solvable(k, args.n, args.trials, args.seed)
        print(json.dumps({"k": k, "n": args.n, "trials": r.trials, "rate": r.rate, "sigma": r.sigma,
                          "bound": independence_bound(k, 0),
                          "gf2_limit": gf2_limit(args.n) if k == 1 else None}), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
