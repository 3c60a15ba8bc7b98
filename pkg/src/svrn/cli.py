"""Command-line entry point: ``svrn {gen,run,lsq,probe}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from svrn.errors import ContractViolation, SolverError
from svrn.harness import (
    SOLVERS,
    Coherence,
    ExperimentConfig,
    SolverSpec,
    SyntheticSpec,
    compute_reference,
    gen_synthetic,
    load_config,
    run_experiment,
)
from svrn.linalg import spectral_approx
from svrn.lsq_solver import LsqMode, LsqSolverConfig, solve_least_squares
from svrn.optimizers import variance_probe
from svrn.problem import Objective, Task, load_csv, save_csv
from svrn.sampling import SamplingDistribution, leverage_distribution, leverage_scores, subsampled_hessian


def _problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--kappa", type=float, default=1e3, help="singular value spread of A")
    p.add_argument("--coherence", choices=[c.value for c in Coherence], default="gaussian")
    p.add_argument("--task", choices=[t.value for t in Task], default="least_squares")
    p.add_argument("--gamma", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)


def _spec(args) -> SyntheticSpec:
    return SyntheticSpec(n=args.n, d=args.d, kappa_A=args.kappa, coherence=args.coherence,
                         task=args.task, gamma=args.gamma, seed=args.seed)


def _cmd_gen(args) -> int:
    inst = gen_synthetic(_spec(args))
    save_csv(inst, args.out)
    print(json.dumps({"out": str(args.out), "n": inst.n, "d": inst.d, "task": inst.task.value}))
    return 0


def _cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if args.out:
            cfg.out = args.out
    else:
        params = {}
        for key in ("m", "t_max", "k", "eta", "max_outer"):
            val = getattr(args, key)
            if val is not None:
                params[key] = val
        if args.resample:
            params["resample_policy"] = args.resample
        solvers = [SolverSpec(name=s, params=dict(params)) for s in (args.solver or ["svrn-ha"])]
        seeds = args.seeds if args.seeds is not None else [0, 1, 2, 3, 4]
        cfg = ExperimentConfig(problem=_spec(args), solvers=solvers, seeds=seeds,
                               out=args.out or "results", metric=args.metric)
    paths = run_experiment(cfg)
    for p in paths:
        print(p)
    return 0


def _cmd_lsq(args) -> int:
    inst = load_csv(args.csv, Task.LEAST_SQUARES, args.gamma)
    cfg = LsqSolverConfig(mode=args.mode, sketch_rows=args.sketch_rows, m=args.m, t_max=args.t_max,
                          target_eps=args.eps, max_stages=args.max_stages, seed=args.seed)
    x, trace = solve_least_squares(inst.A, inst.y, inst.gamma, cfg)
    if args.out:
        np.savetxt(args.out, x)
    obj = Objective(inst)
    print(json.dumps({"loss": obj.loss(x), "stages": len(trace) - 1,
                      "passes": float(trace.passes[-1]),
                      "out": None if args.out is None else str(args.out)}))
    return 0


def _cmd_probe(args) -> int:
    inst = gen_synthetic(_spec(args))
    obj = Objective(inst)
    rng = np.random.default_rng(args.seed)
    if args.kind == "spectral":
        x_star, H = compute_reference(obj)
        out = []
        for k in args.k or [inst.d, 4 * inst.d, 16 * inst.d]:
            eps = [spectral_approx(subsampled_hessian(obj, x_star, k, None, rng), H, 1.0)[1]
                   for _ in range(args.trials)]
            out.append({"k": k, "eps_median": float(np.median(eps)), "eps_max": float(np.max(eps))})
        print(json.dumps({"kind": "spectral", "results": out}))
        return 0

    x_star, _ = compute_reference(obj)
    direction = rng.standard_normal(inst.d)
    x = x_star + args.radius * direction / np.linalg.norm(direction)
    dist = leverage_distribution(leverage_scores(inst.A)) if args.leverage else SamplingDistribution.uniform(inst.n)
    out = []
    for m in args.m or [inst.d * 4, inst.d * 8, inst.d * 16]:
        stats = variance_probe(obj, x, x_star, m, args.trials, rng, dist)
        out.append({"m": m, "mean": stats.mean, "median": stats.quantiles[0.5]})
    print(json.dumps({"kind": "variance", "leverage": args.leverage, "results": out}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svrn", description="Variance-reduced Newton solvers and experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic problem as CSV (y, a_1..a_d)")
    _problem_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="run an experiment from a TOML config or flags")
    p.add_argument("--config", type=Path)
    _problem_args(p)
    p.add_argument("--solver", action="append", choices=SOLVERS)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--m", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--eta", type=float, help="SVRG step size")
    p.add_argument("--max-outer", dest="max_outer", type=int)
    p.add_argument("--resample", choices=["once", "stage", "step"])
    p.add_argument("--metric", choices=["H", "grad"], default="H")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("lsq", help="solve a least-squares CSV to relative accuracy eps")
    p.add_argument("csv", type=Path)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--mode", choices=[LsqMode.RHT.value, LsqMode.LEVERAGE.value], default="rht")
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--sketch-rows", dest="sketch_rows", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--max-stages", dest="max_stages", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="write the solution vector here")
    p.set_defaults(func=_cmd_lsq)

    p = sub.add_parser("probe", help="gradient-variance or Hessian-accuracy diagnostics (JSON)")
    p.add_argument("kind", choices=["variance", "spectral"])
    _problem_args(p)
    p.add_argument("--m", type=int, nargs="+", help="gradient batch sizes (variance)")
    p.add_argument("--k", type=int, nargs="+", help="Hessian sample sizes (spectral)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--radius", type=float, default=1e-2, help="distance of the probe point from x*")
    p.add_argument("--leverage", action="store_true", help="sample by leverage scores")
    p.set_defaults(func=_cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ContractViolation, SolverError, OSError) as exc:
        print(f"svrn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
