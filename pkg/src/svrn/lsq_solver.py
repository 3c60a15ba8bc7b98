"""Randomized least-squares solver: sketched preconditioner plus SVRN stages.

The Hessian ``(1/n) A^T A + gamma I`` is estimated once from a subsampled
randomized Hadamard sketch and never touched again (the problem is
quadratic). The gradient batches are made condition-number free in one of
two ways: sample rows proportionally to their leverage scores, or rotate the
whole problem with a randomized Hadamard transform and sample uniformly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from svrn.errors import ContractViolation, SketchFailed
from svrn.optimizers import HessianModel, ResamplePolicy, SvrnConfig, svrn_run
from svrn.problem import Objective, ProblemInstance, Task
from svrn.sampling import leverage_distribution, leverage_scores, rht_apply


class LsqMode(str, enum.Enum):
    LEVERAGE = "leverage"
    RHT = "rht"
    UNIFORM = "uniform"  # diagnostic only: no Hadamard rotation anywhere


def default_sketch_rows(d: int) -> int:
    return 16 * d * max(1, math.ceil(math.log2(d)))


@dataclass(frozen=True)
class LsqSolverConfig:
    mode: LsqMode = LsqMode.RHT
    sketch_rows: int | None = None
    m: int | None = None
    t_max: int | None = None
    target_eps: float = 1e-8
    max_stages: int = 100
    resample_policy: ResamplePolicy = ResamplePolicy.STAGE
    seed: int = 0
    # accuracy the sketch is built for; inflates the production gap estimate
    eps_h: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "mode", LsqMode(self.mode))
        object.__setattr__(self, "resample_policy", ResamplePolicy(self.resample_policy))
        if not self.target_eps > 0:
            raise ContractViolation(f"target_eps must be positive, got {self.target_eps}")
        if not 0 <= self.eps_h < 1:
            raise ContractViolation(f"eps_h must lie in [0, 1), got {self.eps_h}")


def sketched_hessian_inverse(A: np.ndarray, sketch_rows: int, rng: np.random.Generator,
                             gamma: float = 0.0, rotate: bool = True) -> HessianModel:
    """Fixed Hessian model from a subsampled randomized Hadamard sketch of ``A``.

    ``sketch_rows`` rows of the transformed matrix are kept (without
    replacement) and rescaled by ``sqrt(n_pad / sketch_rows)``, so that
    keeping every row reproduces ``A^T A`` exactly. A rank-deficient sketch is
    redrawn once before giving up. ``rotate=False`` skips the Hadamard
    rotation and subsamples the raw rows, which is only useful to show what
    the rotation buys on coherent data.
    """
    A = np.asarray(A, dtype=float)
    n, d = A.shape
    if sketch_rows < d:
        raise ContractViolation(f"sketch needs at least d={d} rows, got {sketch_rows}")
    for _ in range(2):
        if rotate:
            A_t, _, tr = rht_apply(A, np.zeros(n), rng)
            n_rows = tr.n_pad
        else:
            A_t, n_rows = A, n
        k = min(sketch_rows, n_rows)
        rows = np.sort(rng.choice(n_rows, size=k, replace=False))
        SA = A_t[rows] * math.sqrt(n_rows / k)
        G = SA.T @ SA
        w = np.linalg.eigvalsh(0.5 * (G + G.T))
        if w[0] <= 1e-12 * w[-1]:
            continue
        H = G / n
        H[np.diag_indices_from(H)] += gamma
        return HessianModel.fixed(H)
    raise SketchFailed("sketch lost rank twice")


def rht_instance(inst: ProblemInstance, rng: np.random.Generator) -> ProblemInstance:
    """The same objective expressed through Hadamard-rotated data.

    Rows are rescaled by ``sqrt(n_pad / n)`` so that the averaged loss over
    ``n_pad`` rows equals the original averaged loss over ``n`` rows.
    """
    A_t, y_t, tr = rht_apply(inst.A, inst.y, rng)
    s = math.sqrt(tr.n_pad / tr.n)
    return ProblemInstance(A=A_t * s, y=y_t * s, gamma=inst.gamma, task=Task.LEAST_SQUARES)


def solve_least_squares(A: np.ndarray, y: np.ndarray, gamma: float, cfg: LsqSolverConfig = LsqSolverConfig(),
                        rng: np.random.Generator | None = None, *, f_star: float | None = None,
                        x_star=None):
    """Minimize ``(1/2n) ||A x - y||^2 + gamma/2 ||x||^2`` starting from ``x = 0``.

    With ``f_star`` (test mode) the run stops once ``f(x) <= (1 + eps) f_star``.
    Otherwise the loss gap is estimated from the full gradient in the
    preconditioner's metric, ``g^T B g / (2 (1 - eps_h))``, and the run stops
    once that estimate certifies the same relative accuracy (a zero optimum,
    as for a consistent system, can never be certified this way, so such a
    run uses all ``max_stages``). ``x_star``, if given, drives the error
    column of the returned trace.

    Returns ``(x, trace)``.
    """
    inst = ProblemInstance(A=A, y=y, gamma=gamma, task=Task.LEAST_SQUARES)
    n, d = inst.n, inst.d
    if not n > d * math.log2(max(n / d, 1.0)) or n < 2 * d:
        raise ContractViolation(f"schedule needs n > d log2(n/d); got n={n}, d={d}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    rows = cfg.sketch_rows if cfg.sketch_rows is not None else default_sketch_rows(d)
    hess = sketched_hessian_inverse(inst.A, rows, rng, gamma, rotate=cfg.mode is not LsqMode.UNIFORM)

    dist = None
    if cfg.mode is LsqMode.RHT:
        inst = rht_instance(inst, rng)
    elif cfg.mode is LsqMode.LEVERAGE:
        dist = leverage_distribution(leverage_scores(inst.A))
    obj = Objective(inst)

    overrides = {"max_outer": cfg.max_stages, "seed": int(rng.integers(2**63)),
                 "resample_policy": cfg.resample_policy, "k": 1, "tol": 0.0}
    if cfg.m is not None:
        overrides["m"] = cfg.m
    if cfg.t_max is not None:
        overrides["t_max"] = cfg.t_max
    svrn_cfg = SvrnConfig.defaults(obj.n, d, **overrides)

    eps = cfg.target_eps
    if f_star is not None:
        def stop(x, g):
            return obj.loss(x) <= (1.0 + eps) * f_star
    else:
        def stop(x, g):
            gap = 0.5 * float(g @ hess.solve(g)) / (1.0 - cfg.eps_h)
            return gap <= eps * max(obj.loss(x) - gap, 0.0)

    return svrn_run(obj, np.zeros(d), hess, svrn_cfg, x_star=x_star, dist=dist, stop=stop)
