"""Stochastic Variance-Reduced Newton and friends for convex finite-sum problems."""

from svrn.errors import (
    ContractViolation,
    Diverged,
    LineSearchFailed,
    NotDescent,
    NotPositiveDefinite,
    NotStronglyConvex,
    RankDeficient,
    SketchFailed,
)
from svrn.linalg import SpdFactorization, fwht, h_norm, spd_factor, spectral_approx
from svrn.lsq_solver import LsqMode, LsqSolverConfig, sketched_hessian_inverse, solve_least_squares
from svrn.optimizers import (
    ArmijoParams,
    ConvergenceTrace,
    HessianModel,
    ResamplePolicy,
    SvrnConfig,
    armijo_search,
    newton_run,
    sn_ha_run,
    sngs_ha_run,
    svrg_run,
    svrn_ha_run,
    svrn_run,
    svrn_stage,
    variance_probe,
)
from svrn.problem import Objective, ProblemInstance, Task, strong_smooth_estimates
from svrn.sampling import (
    RhtTransform,
    SamplingDistribution,
    leverage_distribution,
    leverage_scores,
    rht_apply,
    subsampled_hessian,
    uniform_batch,
)

__version__ = "0.1.0"
