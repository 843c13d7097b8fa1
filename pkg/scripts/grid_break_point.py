"""Worst true gap of the 1-D grid search under the planted adversary, as a function of delta / eps.

Instances: random piecewise-linear functions plus cones whose minimizer sweeps
one grid cell. Both the safety mode and the coarse mode are reported.
"""
import argparse

import numpy as np

from zonoise.grid import Grid1DConfig, grid_search_1d
from zonoise.harness import exhaustive_grid_policy
from zonoise.oracles import NoisyOracle
from zonoise.problems import ClassParams, Interval, make_instance


def worst_gap(insts, eps, delta, sf):
    worst = 0.0
    for inst in insts:
        cfg = Grid1DConfig.for_accuracy(inst.set, 1.0, eps, sf)
        o = NoisyOracle(inst, exhaustive_grid_policy(inst, 1.0, eps, delta, sf))
        rep = grid_search_1d(o, 1.0, eps, cfg)
        worst = max(worst, inst.gap(np.asarray(rep.x)))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--points", type=int, default=21)
    args = ap.parse_args()

    eps = args.eps
    insts = [make_instance("pwl", ClassParams(n=1, M=1.0, R=1.0), Interval(0.0, 1.0), seed=s) for s in range(args.instances)]
    cone = ClassParams(n=1, M=1.0, R=1.0, mu=1.0)
    step = eps / 4
    for u in np.linspace(0.5, 0.5 + step, 26):
        insts.append(make_instance("cone", cone, Interval(0.0, 1.0), seed=0, minimizer=(float(u),)))

    print("delta/eps,worst_gap_safety/eps,worst_gap_coarse/eps")
    for r in np.linspace(0.2, 0.6, args.points):
        g2 = worst_gap(insts, eps, r * eps, 2)
        g1 = worst_gap(insts, eps, r * eps, 1)
        print(f"{r:.4f},{g2 / eps:.4f},{g1 / eps:.4f}")


if __name__ == "__main__":
    main()
