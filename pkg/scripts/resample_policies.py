"""Compare the gradient-batch resampling policies of SVRN-HA.

Prints passes needed to reach a target error for once / stage / step.
"""

import argparse

import numpy as np

from svrn.optimizers import SvrnConfig, svrn_ha_run

from _common import passes_to, problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--task", default="least_squares")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    inst, obj, x_star, H = problem(args.n, args.d, task=args.task)
    print(f"{'policy':>8} {'median passes':>14} {'per seed'}")
    for policy in ("once", "stage", "step"):
        hits = []
        for seed in range(args.seeds):
            cfg = SvrnConfig.defaults(inst.n, inst.d, max_outer=60, seed=seed, resample_policy=policy)
            _, trace = svrn_ha_run(obj, np.zeros(inst.d), cfg, x_star, h_star=H)
            hits.append(passes_to(trace, args.tol))
        print(f"{policy:>8} {np.median(hits):>14.1f} {hits}")


if __name__ == "__main__":
    main()
