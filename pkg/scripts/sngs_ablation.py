"""SVRN-HA against SNGS-HA (same schedule, no variance reduction).

SNGS-HA stalls at an error floor set by the subsampled gradient noise;
SVRN-HA keeps contracting. Prints error versus passes for both.
"""

import argparse

import numpy as np

from svrn.optimizers import SvrnConfig, sngs_ha_run, svrn_ha_run

from _common import problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budget", type=float, default=40.0, help="passes over the data")
    ap.add_argument("--fallback", action="store_true",
                    help="let SNGS-HA fall back to Newton steps whenever the line search shrinks")
    args = ap.parse_args()

    inst, obj, x_star, H = problem(args.n, args.d)
    cfg = SvrnConfig.defaults(inst.n, inst.d, max_outer=60, seed=args.seed, resample_policy="step")
    _, ours = svrn_ha_run(obj, np.zeros(inst.d), cfg, x_star, h_star=H)
    _, sngs = sngs_ha_run(obj, np.zeros(inst.d), cfg, x_star, h_star=H, fallback=args.fallback)
    for name, trace in (("svrn-ha", ours), ("sngs-ha", sngs)):
        keep = trace.passes <= args.budget
        print(f"# {name}: min err {trace.errors[keep].min():.3e} within {args.budget:g} passes")
        for p, e, ph in zip(trace.passes[keep], trace.errors[keep], np.asarray(trace.phases)[keep]):
            print(f"{name}\t{p:7.2f}\t{e:.3e}\t{ph}")


if __name__ == "__main__":
    main()
