"""Empirical noise threshold of the simplex search as the dimension grows.

Prints one CSV row per dimension and the fitted exponent p of delta_lo ~ n^p.
"""
import argparse
import csv
import sys

import numpy as np

from zonoise.harness import POLICIES, MalnQuery, default_params, measure_maln


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--policy", choices=POLICIES, default="exhaustive")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "status", "delta_lo", "delta_hi", "theory_bound", "ratio"])
    los = []
    for n in args.n:
        q = MalnQuery("simplex", default_params("simplex", "cone", n), args.eps, policy=args.policy, trials=args.trials, seed=args.seed)
        r = measure_maln(q, jobs=args.jobs)
        los.append(r.delta_lo)
        w.writerow([n, r.status, r.delta_lo, r.delta_hi, r.theory_bound, r.ratio])
        sys.stdout.flush()
    if len(args.n) > 1 and min(los) > 0:
        p = np.polyfit(np.log(args.n), np.log(los), 1)[0]
        print(f"# fitted exponent p = {p:.3f}")


if __name__ == "__main__":
    main()
