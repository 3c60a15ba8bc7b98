"""Synthetic problems, reference optima, and the experiment runner.

A run writes one JSON Lines trace per (solver, seed) pair plus a CSV summary
of median error curves across seeds.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from svrn.errors import ContractViolation, LineSearchFailed, SolverError
from svrn.lsq_solver import LsqMode, LsqSolverConfig, solve_least_squares
from svrn.optimizers import (
    ArmijoParams,
    SvrnConfig,
    armijo_search,
    newton_run,
    sn_ha_run,
    sngs_ha_run,
    svrg_run,
    svrn_ha_run,
)
from svrn.problem import Objective, ProblemInstance, Task, load_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)


class Coherence(str, enum.Enum):
    GAUSSIAN = "gaussian"
    GAMMA_SCALED = "gamma"


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    kappa_A: float = 1e3
    coherence: Coherence = Coherence.GAUSSIAN
    task: Task = Task.LEAST_SQUARES
    noise_sigma: float = math.sqrt(0.1)
    gamma: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coherence", Coherence(self.coherence))
        object.__setattr__(self, "task", Task(self.task))
        if self.kappa_A < 1:
            raise ContractViolation(f"kappa_A must be >= 1, got {self.kappa_A}")
        if self.n < self.d or self.d < 1:
            raise ContractViolation(f"need n >= d >= 1, got n={self.n}, d={self.d}")


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator | None = None) -> ProblemInstance:
    """Gaussian data with a prescribed singular value spread.

    The singular values of a Gaussian ``n x d`` matrix are replaced by a
    linear grid from ``kappa_A`` down to 1. In the Gamma-scaled variant row
    ``i`` is further divided by ``sqrt(g_i)``, ``g_i ~ Gamma(2, 1/2)``, which
    creates many high-leverage rows. Targets come from a planted
    ``x ~ N(0, I/d)``: ``sign(A x)`` for logistic regression, ``A x`` plus
    Gaussian noise for least squares.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n, d = spec.n, spec.d
    G = rng.standard_normal((n, d))
    U, _, Vt = np.linalg.svd(G, full_matrices=False)
    A = (U * np.linspace(spec.kappa_A, 1.0, d)) @ Vt
    if spec.coherence is Coherence.GAMMA_SCALED:
        g = rng.gamma(shape=2.0, scale=0.5, size=n)
        A = A / np.sqrt(g)[:, None]
    x_true = rng.normal(0.0, math.sqrt(1.0 / d), size=d)
    z = A @ x_true
    if spec.task is Task.LOGISTIC:
        y = np.where(z >= 0, 1.0, -1.0)
    else:
        y = z + spec.noise_sigma * rng.standard_normal(n)
    return ProblemInstance(A=A, y=y, gamma=spec.gamma, task=spec.task)


def compute_reference(obj: Objective, x0: np.ndarray | None = None, gtol: float = 1e-14,
                      max_iter: int = 200):
    """Trusted optimum ``x*`` and the Hessian there.

    Least squares: QR solve of the regularized system. Logistic: damped
    Newton until the gradient norm reaches ``gtol``; if rounding stalls the
    gradient above ``gtol`` but below ``1e-10`` for several iterations the
    iterate is accepted. Not charged to the objective's cost counters.
    """
    inst = obj.inst
    n, d = inst.n, inst.d
    with obj.uncounted():
        if inst.task is Task.LEAST_SQUARES:
            M, b = inst.A / math.sqrt(n), inst.y / math.sqrt(n)
            if inst.gamma > 0:
                M = np.vstack([M, math.sqrt(inst.gamma) * np.eye(d)])
                b = np.concatenate([b, np.zeros(d)])
            Q, R = np.linalg.qr(M, mode="reduced")
            x = scipy.linalg.solve_triangular(R, Q.T @ b)
            return x, obj.full_hessian(x)

        x = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
        best, stall = math.inf, 0
        f_x = obj.loss(x)
        for _ in range(max_iter):
            g = obj.full_gradient(x)
            gn = float(np.linalg.norm(g))
            if gn <= gtol:
                return x, obj.full_hessian(x)
            if gn < best * 0.5:
                best, stall = gn, 0
            else:
                stall += 1
                if stall >= 5 and best <= 1e-10:
                    return x, obj.full_hessian(x)
            H = obj.full_hessian(x)
            v = -scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)
            try:
                eta, f_x = armijo_search(obj, x, v, g, ArmijoParams(), f_x)
            except LineSearchFailed:
                # rounding noise in f: trust the Newton step this close in
                eta, f_x = 1.0, obj.loss(x + v)
            x = x + eta * v
    raise SolverError(f"Newton did not reach gradient norm {gtol:g} in {max_iter} iterations")


SOLVERS = ("svrn-ha", "sn-ha", "sngs-ha", "svrg", "newton", "lsq-rht", "lsq-leverage")


@dataclass
class SolverSpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SOLVERS:
            raise ContractViolation(f"unknown solver {self.name!r}; choose from {SOLVERS}")


@dataclass
class ExperimentConfig:
    problem: SyntheticSpec | str
    solvers: list[SolverSpec]
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out: str = "results"
    metric: str = "H"  # "H": ||x - x*||_H^2 ratio; "grad": squared gradient norm ratio
    csv_task: Task = Task.LOGISTIC
    csv_gamma: float = 1e-8

    def __post_init__(self):
        if not self.solvers:
            raise ContractViolation("experiment needs at least one solver")
        if not self.seeds:
            raise ContractViolation("experiment needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ContractViolation(f"seeds must be distinct: {self.seeds}")
        if self.metric not in ("H", "grad"):
            raise ContractViolation(f"metric must be 'H' or 'grad', got {self.metric!r}")
        self.csv_task = Task(self.csv_task)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an experiment from a TOML file.

    ``[problem]`` holds either ``csv = "path"`` (plus ``task``/``gamma``) or
    the synthetic fields; each ``[[solver]]`` table has a ``name`` and
    solver parameters.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    prob = dict(raw.get("problem", {}))
    if "csv" in prob:
        problem = str(prob["csv"])
        extra = {"csv_task": prob.get("task", Task.LOGISTIC), "csv_gamma": prob.get("gamma", 1e-8)}
    else:
        problem = SyntheticSpec(**prob)
        extra = {}
    solvers = []
    for entry in raw.get("solver", []):
        entry = dict(entry)
        solvers.append(SolverSpec(name=entry.pop("name"), params=entry))
    kwargs = {k: raw[k] for k in ("seeds", "out", "metric") if k in raw}
    return ExperimentConfig(problem=problem, solvers=solvers, **kwargs, **extra)


def _svrn_config(obj, params, seed):
    keys = ("m", "t_max", "k", "resample_policy", "max_outer")
    over = {k: params[k] for k in keys if k in params}
    if "resample" in params:
        over["resample_policy"] = params["resample"]
    return SvrnConfig.defaults(obj.n, obj.d, seed=seed, **over)


def run_solver(name: str, params: dict, inst: ProblemInstance, seed: int,
               x_star=None, h_star=None):
    """Run one named solver on a fresh objective; returns ``(x, trace)``."""
    obj = Objective(inst)
    x0 = np.zeros(inst.d)
    if name in ("svrn-ha", "sn-ha", "sngs-ha"):
        run = {"svrn-ha": svrn_ha_run, "sn-ha": sn_ha_run, "sngs-ha": sngs_ha_run}[name]
        return run(obj, x0, _svrn_config(obj, params, seed), x_star, h_star=h_star)
    if name == "svrg":
        return svrg_run(obj, x0, eta=params.get("eta"), inner_m=params.get("inner_m"),
                        max_outer=params.get("max_outer", 20), x_star=x_star,
                        h_star=h_star, seed=seed)
    if name == "newton":
        return newton_run(obj, x0, max_outer=params.get("max_outer", 50), x_star=x_star,
                          h_star=h_star)
    if name.startswith("lsq-"):
        if inst.task is not Task.LEAST_SQUARES:
            raise ContractViolation(f"{name} solves least squares only")
        mode = LsqMode.RHT if name == "lsq-rht" else LsqMode.LEVERAGE
        keys = ("sketch_rows", "m", "t_max", "target_eps", "max_stages")
        cfg = LsqSolverConfig(mode=mode, seed=seed, **{k: params[k] for k in keys if k in params})
        f_star = None if x_star is None else Objective(inst).loss(x_star)
        return solve_least_squares(inst.A, inst.y, inst.gamma, cfg, f_star=f_star, x_star=x_star)
    raise ContractViolation(f"unknown solver {name!r}")


def build_problem(cfg: ExperimentConfig) -> ProblemInstance:
    if isinstance(cfg.problem, SyntheticSpec):
        return gen_synthetic(cfg.problem)
    return load_csv(cfg.problem, cfg.csv_task, cfg.csv_gamma)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SVRN_THREADS", "1")))
    except ValueError:
        return 1


def _trace_path(out: Path, solver: str, seed: int) -> Path:
    return out / f"{solver}__seed{seed}.jsonl"


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Run every (solver, seed) pair and write traces plus ``summary.csv``.

    A failing run is logged and its trace file ends with an ``error`` record;
    the sweep carries on. Returns the written paths, summary last.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = build_problem(cfg)
    x_star = h_star = None
    if cfg.metric == "H":
        x_star, h_star = compute_reference(Objective(inst))

    def job(spec: SolverSpec, seed: int):
        path = _trace_path(out, spec.name, seed)
        error = None
        try:
            _, trace = run_solver(spec.name, spec.params, inst, seed, x_star, h_star)
        except (SolverError, ContractViolation) as exc:
            log.warning("%s seed %d failed: %s", spec.name, seed, exc)
            trace, error = getattr(exc, "trace", None), f"{type(exc).__name__}: {exc}"
        lines = [] if trace is None else trace.payload(spec.name, seed)
        if error is not None:
            lines.append({"solver": spec.name, "seed": seed, "error": error})
        with open(path, "w") as fh:
            for rec in lines:
                fh.write(json.dumps(rec) + "\n")
        return path, lines

    jobs = [(spec, seed) for spec in cfg.solvers for seed in cfg.seeds]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        results = list(pool.map(lambda js: job(*js), jobs))

    summary = out / "summary.csv"
    _write_summary(summary, [lines for _, lines in results])
    return [p for p, _ in results] + [summary]


def _write_summary(path: Path, runs: list[list[dict]]) -> None:
    by_key: dict[tuple[str, int], list[dict]] = {}
    order: list[str] = []
    for lines in runs:
        for rec in lines:
            if "error" in rec:
                continue
            if rec["solver"] not in order:
                order.append(rec["solver"])
            by_key.setdefault((rec["solver"], rec["s"]), []).append(rec)
    cols = ["solver", "s", "runs", "passes_median", "err_median", "err_q25", "err_q75", "wall_s_median"]
    with open(path, "w", newline="") as fh, np.errstate(invalid="ignore"):
        w = csv.writer(fh)
        w.writerow(cols)
        for solver in order:
            steps = sorted(s for (name, s) in by_key if name == solver)
            for s in steps:
                recs = by_key[(solver, s)]
                err = np.array([r["err"] for r in recs])
                w.writerow([solver, s, len(recs),
                            float(np.median([r["passes"] for r in recs])),
                            float(np.median(err)), float(np.quantile(err, 0.25)),
                            float(np.quantile(err, 0.75)),
                            float(np.median([r["wall_s"] for r in recs]))])


def read_trace(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def config_to_dict(cfg: ExperimentConfig) -> dict:
    problem = cfg.problem if isinstance(cfg.problem, str) else asdict(cfg.problem)
    return {"problem": problem, "solvers": [asdict(s) for s in cfg.solvers],
            "seeds": list(cfg.seeds), "out": cfg.out, "metric": cfg.metric}
