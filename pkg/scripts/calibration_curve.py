"""Success rate of random t-sparse systems as a function of m/n.

Example::

    python3 scripts/calibration_curve.py --n 512 --trials 50 --out calibration.csv
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from gfdict.experiments import calibration_curve


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--t", type=int, action="append", help="row weights (default: 3 and ceil(ln n))")
    p.add_argument("--ratios", type=float, nargs="+",
                   default=[1.0, 1.01, 1.02, 1.05, 1.1, 1.15, 1.2, 1.22, 1.25, 1.3, 1.4])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)
    ts = args.t or [3, math.ceil(math.log(args.n))]
    rows = calibration_curve(args.n, ts, args.ratios, args.trials, k=args.k, seed=args.seed)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
