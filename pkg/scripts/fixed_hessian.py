"""SVRN with a fixed subsampled Hessian of h rows, for several h.

Shows the accuracy threshold: below roughly 16d rows the preconditioner is
too coarse and the iteration diverges.
"""

import argparse

import numpy as np

from svrn.linalg import spectral_approx
from svrn.optimizers import HessianModel, SvrnConfig, svrn_run
from svrn.sampling import subsampled_hessian

from _common import mean_ratio, problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--mults", type=int, nargs="+", default=[1, 2, 4, 8, 16, 32])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--stages", type=int, default=6)
    args = ap.parse_args()

    inst, obj, x_star, H = problem(args.n, args.d)
    print(f"{'h':>6} {'median eps':>11} {'median ratio':>13}")
    for mult in args.mults:
        eps, rates = [], []
        for seed in range(args.seeds):
            H_hat = subsampled_hessian(obj, x_star, mult * inst.d, None, np.random.default_rng(seed))
            eps.append(spectral_approx(H_hat, H, 0.25)[1])
            cfg = SvrnConfig.defaults(inst.n, inst.d, max_outer=args.stages, seed=seed)
            _, trace = svrn_run(obj, np.zeros(inst.d), HessianModel.fixed(H_hat), cfg, x_star, h_star=H)
            rates.append(mean_ratio(trace))
        print(f"{mult * inst.d:>6} {np.median(eps):>11.3f} {np.median(rates):>13.3g}")


if __name__ == "__main__":
    main()
