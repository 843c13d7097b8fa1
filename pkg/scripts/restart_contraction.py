"""Distance to the minimizer after each restart, against the schedule's distance bound.

Runs the Lipschitz and the smooth restart schedules on seeded quadratic
instances in a ball at a chosen noise level.
"""
import argparse

import numpy as np

from zonoise.harness import default_params
from zonoise.oracles import NoisyOracle, UniformBounded
from zonoise.problems import Ball, make_instance
from zonoise.reductions import restart_solve, schedule_lipschitz_sg, schedule_smooth_sg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--eps", type=float, default=2.0**-5)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--delta", type=float, default=0.0, help="uniform noise level")
    args = ap.parse_args()

    p = default_params("restart", "quadratic", args.n)
    S = Ball(tuple([0.0] * args.n), 1.0)
    for name, make in (("lip-sg", schedule_lipschitz_sg), ("smooth-sg", schedule_smooth_sg)):
        s = make(p, args.eps)
        inside = np.zeros(s.k_total)
        ratio = np.zeros(s.k_total)
        for seed in range(args.seeds):
            inst = make_instance("quadratic", p, S, seed=seed)
            rep = restart_solve(NoisyOracle(inst, UniformBounded(args.delta, seed=seed)), s, seed=seed)
            d = np.linalg.norm(np.array(rep.extra["restart_points"][1:]) - inst.minimizer, axis=1)
            bounds = np.array([e.distance for e in s.entries])
            inside += d <= bounds
            ratio += d / bounds
        print(f"{name}: {s.k_total} restarts, {s.repetitions} repetition(s) each")
        print("k,delta_k,bound,frac_within_bound,mean_distance/bound")
        for e, f, r in zip(s.entries, inside / args.seeds, ratio / args.seeds):
            print(f"{e.k},{e.delta_k:.3e},{e.distance:.4f},{f:.2f},{r:.3f}")


if __name__ == "__main__":
    main()
