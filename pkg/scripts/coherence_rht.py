"""Least-squares solver on Gaussian and coherent (Gamma-scaled) data.

Per-stage contraction for RHT, leverage-score and unrotated uniform
sampling.
"""

import argparse

import numpy as np

from svrn.lsq_solver import LsqSolverConfig, solve_least_squares

from _common import mean_ratio, problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--stages", type=int, default=6)
    args = ap.parse_args()

    print(f"{'data':>9} {'mode':>9} {'median ratio':>13}")
    for coherence in ("gaussian", "gamma"):
        inst, _, x_star, _ = problem(args.n, args.d, coherence=coherence)
        for mode in ("rht", "leverage", "uniform"):
            rates = []
            for seed in range(args.seeds):
                cfg = LsqSolverConfig(mode=mode, seed=seed, max_stages=args.stages)
                _, trace = solve_least_squares(inst.A, inst.y, inst.gamma, cfg, x_star=x_star)
                rates.append(mean_ratio(trace))
            print(f"{coherence:>9} {mode:>9} {np.median(rates):>13.3g}")


if __name__ == "__main__":
    main()
