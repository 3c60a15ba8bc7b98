"""Second-order finite-sum solvers and their first-order baseline.

SVRN runs large-batch variance-reduced gradient steps preconditioned by a
fixed Hessian estimate with unit step size. SVRN-HA wraps it in a practical
loop: subsampled Hessians are averaged across outer iterations and an
Armijo line search decides when the iterate is close enough for the
variance-reduced inner loop to take over from plain subsampled Newton.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from svrn.errors import (
    ContractViolation,
    Diverged,
    LineSearchFailed,
    NotDescent,
    SolverError,
)
from svrn.linalg import SpdFactorization, spd_factor
from svrn.problem import Objective, strong_smooth_estimates
from svrn.sampling import SamplingDistribution, subsampled_hessian


class ResamplePolicy(str, enum.Enum):
    ONCE = "once"
    STAGE = "stage"
    STEP = "step"


@dataclass(frozen=True)
class ArmijoParams:
    """Backtracking constants.

    ``ftol`` is a relative slack on the sufficient-decrease test that absorbs
    rounding in the loss once the achievable decrease drops below machine
    precision.
    """

    c: float = 1e-4
    beta: float = 0.5
    max_halvings: int = 50
    ftol: float = 1e-14

    def __post_init__(self):
        if not 0 < self.c < 0.5:
            raise ContractViolation(f"Armijo c must lie in (0, 1/2), got {self.c}")
        if not 0 < self.beta < 1:
            raise ContractViolation(f"Armijo beta must lie in (0, 1), got {self.beta}")
        if self.max_halvings < 0:
            raise ContractViolation("max_halvings must be nonnegative")


@dataclass(frozen=True)
class SvrnConfig:
    m: int
    t_max: int
    k: int
    resample_policy: ResamplePolicy = ResamplePolicy.STAGE
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    max_outer: int = 50
    seed: int = 0
    tol: float = 1e-13

    def __post_init__(self):
        if self.m < 1 or self.t_max < 1 or self.k < 1:
            raise ContractViolation(f"m, t_max, k must be positive: {self.m}, {self.t_max}, {self.k}")
        object.__setattr__(self, "resample_policy", ResamplePolicy(self.resample_policy))

    @classmethod
    def defaults(cls, n: int, d: int, **overrides) -> "SvrnConfig":
        """``t_max = floor(log2(n/d))``, ``m = floor(n / log2(n/d))``, ``k = 4d``."""
        if n < 2 * d:
            raise ContractViolation(f"default schedule needs n/d >= 2, got n={n}, d={d}")
        r = math.log2(n / d)
        params = dict(m=int(n // r), t_max=int(math.floor(r)), k=4 * d)
        params.update(overrides)
        return cls(**params)


class HessianModel:
    """Running average of Hessian estimates with a factorization kept in sync.

    After absorbing estimates ``H_0, ..., H_s`` the average is their plain
    arithmetic mean. The Cholesky factor is rebuilt on every update.
    """

    def __init__(self, d: int):
        self.d = d
        self.count = 0
        self.H = np.zeros((d, d))
        self._factor: SpdFactorization | None = None

    @classmethod
    def fixed(cls, H: np.ndarray) -> "HessianModel":
        model = cls(H.shape[0])
        model.update(H)
        return model

    @property
    def factor(self) -> SpdFactorization:
        if self._factor is None:
            raise ContractViolation("Hessian model holds no estimate yet")
        return self._factor

    def update(self, H_hat: np.ndarray) -> None:
        s = self.count
        self.H = (s / (s + 1)) * self.H + (1.0 / (s + 1)) * H_hat
        self.H = 0.5 * (self.H + self.H.T)
        self.count = s + 1
        self._factor = spd_factor(self.H)

    def solve(self, g: np.ndarray) -> np.ndarray:
        return self.factor.solve(g)


class BatchSampler:
    """Gradient batches under a resampling policy.

    ``ONCE`` draws one batch on first use and keeps it for the whole run,
    ``STAGE`` redraws at the start of each stage, ``STEP`` on every call.
    """

    def __init__(self, n: int, m: int, policy: ResamplePolicy,
                 dist: SamplingDistribution | None, rng: np.random.Generator):
        self.m = m
        self.policy = ResamplePolicy(policy)
        self.dist = dist if dist is not None else SamplingDistribution.uniform(n)
        self.rng = rng
        self._cached = None

    def new_stage(self) -> None:
        if self.policy is ResamplePolicy.STAGE:
            self._cached = None

    def batch(self):
        if self.policy is ResamplePolicy.STEP or self._cached is None:
            idx = self.dist.sample(self.m, self.rng)
            self._cached = (idx, self.dist.weights(idx))
        return self._cached


class FixedBatch:
    """Always returns the same index set; ``FixedBatch(np.arange(n))`` enumerates."""

    def __init__(self, indices, weights=None):
        self.indices = np.asarray(indices)
        self.weights = weights

    def new_stage(self) -> None:
        pass

    def batch(self):
        return self.indices, self.weights


@dataclass
class TraceRecord:
    s: int
    passes: float
    grad_evals: int
    hess_evals: int
    err: float
    eta: float | None
    phase: str
    wall_s: float


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.err for r in self.records])

    @property
    def passes(self) -> np.ndarray:
        return np.array([r.passes for r in self.records])

    @property
    def etas(self) -> list:
        return [r.eta for r in self.records]

    @property
    def phases(self) -> list[str]:
        return [r.phase for r in self.records]

    def payload(self, solver: str, seed: int, with_time: bool = True) -> list[dict]:
        """Records in their serialized form (one dict per outer iteration)."""
        out = []
        for r in self.records:
            rec = {"solver": solver, "seed": seed, "s": r.s, "passes": r.passes,
                   "err": r.err, "eta": r.eta, "phase": r.phase}
            if with_time:
                rec["wall_s"] = r.wall_s
            out.append(rec)
        return out


class _Recorder:
    """Error metric plus cost bookkeeping shared by every solver.

    With a reference optimum the metric is ``||x - x*||_H^2 / ||x0 - x*||_H^2``
    with ``H`` the Hessian at ``x*``; otherwise the squared gradient norm
    relative to its value at ``x0``. Diagnostics are not charged as passes.
    """

    def __init__(self, obj: Objective, x0, x_star=None, h_star=None):
        self.obj = obj
        self.g0 = obj.grad_evals
        self.h0 = obj.hess_evals
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        with obj.uncounted():
            if self.x_star is not None:
                self.H = obj.full_hessian(self.x_star) if h_star is None else h_star
            self.denom = 1.0
            raw = self._raw(x0)
        self.denom = raw if raw > 0 else 1.0
        self.trace = ConvergenceTrace()
        self.t0 = time.monotonic()

    def _raw(self, x) -> float:
        if self.x_star is not None:
            dx = x - self.x_star
            return float(dx @ (self.H @ dx))
        g = self.obj.full_gradient(x)
        return float(g @ g)

    def err(self, x) -> float:
        if not np.all(np.isfinite(x)):
            return math.inf
        with self.obj.uncounted():
            return max(self._raw(x), 0.0) / self.denom

    def record(self, s, x, eta, phase) -> float:
        e = self.err(x)
        ge = self.obj.grad_evals - self.g0
        self.trace.records.append(TraceRecord(
            s=s, passes=ge / self.obj.n, grad_evals=ge,
            hess_evals=self.obj.hess_evals - self.h0, err=e,
            eta=None if eta is None else float(eta), phase=phase,
            wall_s=time.monotonic() - self.t0))
        return e


def armijo_search(obj: Objective, x: np.ndarray, v: np.ndarray, g: np.ndarray,
                  params: ArmijoParams = ArmijoParams(), f_x: float | None = None):
    """Largest ``eta`` in ``{1, beta, beta^2, ...}`` with sufficient decrease.

    Returns ``(eta, f(x + eta v))``.
    """
    slope = float(g @ v)
    if not slope < 0:
        raise NotDescent(f"g^T v = {slope} is not negative")
    f0 = obj.loss(x) if f_x is None else f_x
    slack = params.ftol * max(1.0, abs(f0))
    eta = 1.0
    for _ in range(params.max_halvings + 1):
        f_new = obj.loss(x + eta * v)
        if f_new <= f0 + params.c * eta * slope + slack:
            return eta, f_new
        eta *= params.beta
    raise LineSearchFailed(f"no sufficient decrease after {params.max_halvings} halvings")


def svrn_stage(obj: Objective, x_stage: np.ndarray, hess: HessianModel, cfg: SvrnConfig,
               rng: np.random.Generator | None = None, *, dist: SamplingDistribution | None = None,
               sampler=None, g_stage: np.ndarray | None = None) -> np.ndarray:
    """One SVRN stage of ``cfg.t_max`` unit-step inner iterations.

    Each inner step evaluates the batch gradient at the current point and at
    the stage anchor on the same indices, corrects with the anchor's full
    gradient, and applies the Hessian model's inverse. ``sampler`` carries
    batches across stages for the ``ONCE`` policy; without one a fresh
    sampler is built from ``rng``.
    """
    if sampler is None:
        if rng is None:
            raise ContractViolation("svrn_stage needs an rng or a sampler")
        sampler = BatchSampler(obj.n, cfg.m, cfg.resample_policy, dist, rng)
    if g_stage is None:
        g_stage = obj.full_gradient(x_stage)
    hess.factor  # fail early on an empty model
    sampler.new_stage()
    x = np.array(x_stage, dtype=float)
    for _ in range(cfg.t_max):
        idx, w = sampler.batch()
        g_bar = obj.batch_gradient(idx, x, w) - obj.batch_gradient(idx, x_stage, w) + g_stage
        x = x - hess.solve(g_bar)
    return x


def _sngs_stage(obj, x_stage, hess, cfg, sampler):
    sampler.new_stage()
    x = np.array(x_stage, dtype=float)
    for _ in range(cfg.t_max):
        idx, w = sampler.batch()
        x = x - hess.solve(obj.batch_gradient(idx, x, w))
    return x


def _seeded(seed):
    ss = np.random.SeedSequence(seed)
    h, g = ss.spawn(2)
    return np.random.default_rng(h), np.random.default_rng(g)


def _ha_loop(obj, x0, cfg, x_star, h_star, dist, sampler, mode, fallback=True):
    rng_h, rng_g = _seeded(cfg.seed)
    if sampler is None:
        policy = ResamplePolicy.STEP if mode == "sngs" else cfg.resample_policy
        sampler = BatchSampler(obj.n, cfg.m, policy, dist, rng_g)
    x = np.array(x0, dtype=float)
    rec = _Recorder(obj, x, x_star, h_star)
    rec.record(0, x, None, "init")
    hess = HessianModel(obj.d)
    f_x = obj.loss(x)
    eta_prev = 0.0
    switched = False
    for s in range(cfg.max_outer):
        hess.update(subsampled_hessian(obj, x, cfg.k, dist, rng_h))
        g = obj.full_gradient(x)
        if not np.any(g):
            break
        if mode == "sn" or (eta_prev < 1 and (fallback or not switched)):
            phase = "sn"
            v = -hess.solve(g)
        elif mode == "svrn":
            phase = "svrn"
            v = svrn_stage(obj, x, hess, cfg, sampler=sampler, g_stage=g) - x
        else:
            phase = "sngs"
            v = _sngs_stage(obj, x, hess, cfg, sampler) - x
        try:
            eta, f_x = armijo_search(obj, x, v, g, cfg.armijo, f_x)
        except NotDescent:
            if phase == "sn":
                raise
            # a noisy inner loop produced an uphill direction: stay put and
            # let the next iteration fall back to the subsampled Newton step
            eta = 0.0
        except LineSearchFailed as exc:
            exc.trace = rec.trace
            raise
        x = x + eta * v
        eta_prev = eta
        switched = switched or (phase == "sn" and eta >= 1)
        if rec.record(s + 1, x, eta, phase) < cfg.tol:
            break
    return x, rec.trace


def svrn_ha_run(obj: Objective, x0: np.ndarray, cfg: SvrnConfig, x_star=None, *,
                h_star=None, dist: SamplingDistribution | None = None, sampler=None):
    """SVRN with Hessian averaging and Armijo phase switching.

    Every outer iteration draws ``k`` component Hessians at the current
    iterate and folds them into the running average. While the previous
    line search returned a step below 1 the direction is the subsampled
    Newton step; afterwards it is the displacement produced by one SVRN
    stage. The first iteration is always a Newton step. Stops after
    ``max_outer`` iterations or once the error metric drops below ``tol``.

    Returns ``(x_final, trace)``.
    """
    return _ha_loop(obj, x0, cfg, x_star, h_star, dist, sampler, "svrn")


def sn_ha_run(obj: Objective, x0: np.ndarray, cfg: SvrnConfig, x_star=None, *,
              h_star=None, dist: SamplingDistribution | None = None):
    """Subsampled Newton with Hessian averaging (SVRN-HA without the SVRN phase)."""
    return _ha_loop(obj, x0, cfg, x_star, h_star, dist, None, "sn")


def sngs_ha_run(obj: Objective, x0: np.ndarray, cfg: SvrnConfig, x_star=None, *,
                h_star=None, dist: SamplingDistribution | None = None, sampler=None,
                fallback: bool = False):
    """SVRN-HA with the variance-reducing correction removed.

    Inner steps precondition the plain batch gradient; batches are redrawn
    every step unless a sampler is injected. Once the first unit Newton step
    is accepted every later iteration is a gradient-subsampled stage, as in
    SVRN-HA's second phase; a rejected unit step does not bring back
    full-gradient Newton steps unless ``fallback=True`` (with it, the Newton
    steps mask the subsampling error this method exists to expose).
    """
    return _ha_loop(obj, x0, cfg, x_star, h_star, dist, sampler, "sngs", fallback)


def svrn_run(obj: Objective, x0: np.ndarray, hess: HessianModel, cfg: SvrnConfig,
             x_star=None, *, h_star=None, dist: SamplingDistribution | None = None,
             stop=None, line_search: bool = False):
    """Plain SVRN with a fixed Hessian model and unit steps.

    Runs up to ``cfg.max_outer`` stages. ``stop(x, g_stage)`` is an optional
    callback checked before each stage; returning True ends the run. The run
    also ends if the iterate stops being finite (a poor Hessian estimate can
    make the inner loop blow up). With ``line_search=True`` each stage's
    displacement goes through :func:`armijo_search` with ``cfg.armijo`` and
    the accepted step is recorded, which shows whether the unit step holds.
    """
    _, rng_g = _seeded(cfg.seed)
    sampler = BatchSampler(obj.n, cfg.m, cfg.resample_policy, dist, rng_g)
    x = np.array(x0, dtype=float)
    rec = _Recorder(obj, x, x_star, h_star)
    rec.record(0, x, None, "init")
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(cfg.max_outer):
            g = obj.full_gradient(x)
            if not np.any(g) or (stop is not None and stop(x, g)):
                break
            x_new = svrn_stage(obj, x, hess, cfg, sampler=sampler, g_stage=g)
            eta = 1.0
            if line_search:
                try:
                    eta, _ = armijo_search(obj, x, x_new - x, g, cfg.armijo)
                except NotDescent:
                    eta = 0.0
                except LineSearchFailed as exc:
                    exc.trace = rec.trace
                    raise
                x_new = x + eta * (x_new - x)
            x = x_new
            e = rec.record(s + 1, x, eta, "svrn")
            if not math.isfinite(e) or e < cfg.tol:
                break
    return x, rec.trace


def newton_run(obj: Objective, x0: np.ndarray, armijo: ArmijoParams = ArmijoParams(),
               max_outer: int = 50, x_star=None, *, h_star=None, tol: float = 1e-13,
               gtol: float = 0.0):
    """Damped Newton with exact Hessian and full gradient."""
    x = np.array(x0, dtype=float)
    rec = _Recorder(obj, x, x_star, h_star)
    rec.record(0, x, None, "init")
    f_x = obj.loss(x)
    for s in range(max_outer):
        g = obj.full_gradient(x)
        if np.linalg.norm(g) <= gtol or not np.any(g):
            break
        v = -spd_factor(obj.full_hessian(x)).solve(g)
        try:
            eta, f_x = armijo_search(obj, x, v, g, armijo, f_x)
        except LineSearchFailed as exc:
            exc.trace = rec.trace
            raise
        x = x + eta * v
        if rec.record(s + 1, x, eta, "newton") < tol:
            break
    return x, rec.trace


def svrg_run(obj: Objective, x0: np.ndarray, eta: float | None = None, inner_m: int | None = None,
             max_outer: int = 20, x_star=None, *, h_star=None, seed: int = 0,
             diverge_at: float = 1e6, tol: float = 1e-13):
    """SVRG with single-sample inner steps; the last inner iterate becomes the anchor.

    ``eta`` defaults to ``1 / (4 lambda)`` with ``lambda`` the component
    smoothness; ``inner_m`` defaults to ``n``. Raises :class:`Diverged` when
    the error metric exceeds ``diverge_at``.
    """
    if eta is None:
        eta = 0.25 / strong_smooth_estimates(obj.inst).lam
    if not eta > 0:
        raise ContractViolation(f"step size must be positive, got {eta}")
    inner_m = obj.n if inner_m is None else inner_m
    rng = np.random.default_rng(seed)
    A, gamma = obj.inst.A, obj.gamma
    x = np.array(x0, dtype=float)
    rec = _Recorder(obj, x, x_star, h_star)
    rec.record(0, x, None, "init")
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(max_outer):
            g_anchor = obj.full_gradient(x)
            anchor = x.copy()
            idx = rng.integers(0, obj.n, size=inner_m)
            # the component gradients at the anchor are a scalar times a_i
            r_anchor = obj._dphi(A[idx] @ anchor, obj.inst.y[idx])
            for j, i in enumerate(idx):
                a = A[i]
                r = obj._dphi(np.atleast_1d(a @ x), obj.inst.y[i:i + 1])[0]
                x = x - eta * ((r - r_anchor[j]) * a + gamma * (x - anchor) + g_anchor)
                if not (j & 255) and not np.all(np.isfinite(x)):
                    break
            obj._charge_grad(2 * inner_m)
            e = rec.record(s + 1, x, eta, "svrg")
            if not e <= diverge_at:
                raise Diverged(f"error metric {e:.3g} exceeded {diverge_at:g} at stage {s + 1}",
                               trace=rec.trace)
            if e < tol:
                break
    return x, rec.trace


def svrg_sweep(obj: Objective, x0: np.ndarray, max_outer: int = 10, x_star=None, *,
               h_star=None, seed: int = 0, exponents=range(1, 13)):
    """Run SVRG for ``eta = 2^-j / lambda`` over ``exponents``; keep the best final error.

    Returns ``(eta, x_final, trace)`` of the winning step size.
    """
    lam = strong_smooth_estimates(obj.inst).lam
    best = None
    for j in exponents:
        eta = 2.0 ** (-j) / lam
        try:
            x, tr = svrg_run(obj, x0, eta=eta, max_outer=max_outer, x_star=x_star,
                             h_star=h_star, seed=seed)
        except Diverged:
            continue
        if best is None or tr.errors[-1] < best[2].errors[-1]:
            best = (eta, x, tr)
    if best is None:
        raise SolverError("every step size in the sweep diverged")
    return best


class ProbeStats(NamedTuple):
    mean: float  # normalized by ||x - x*||_H^2
    quantiles: dict
    raw_mean: float  # unnormalized squared H^{-1}-norm error
    samples: np.ndarray


def variance_probe(obj: Objective, x: np.ndarray, x_star: np.ndarray, m: int | None,
                   trials: int, rng: np.random.Generator,
                   dist: SamplingDistribution | None = None) -> ProbeStats:
    """Monte-Carlo error of the variance-reduced gradient in the ``H(x)^{-1}`` norm.

    Each trial draws ``m`` indices and measures
    ``g_hat(x) - g_hat(x*) - (grad f(x) - grad f(x*))``; the subtracted
    ``grad f(x*)`` is zero at an exact optimum and only removes its rounding.
    ``m=None`` uses every component once, for which the error is exactly 0.
    """
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    dx = x - x_star
    if not np.any(dx):
        raise ContractViolation("probe point must differ from x_star")
    with obj.uncounted():
        fac = spd_factor(obj.full_hessian(x))
        g_x = obj.full_gradient(x)
        g_star = obj.full_gradient(x_star)
        scale = float(dx @ (fac.M @ dx))
        if dist is None:
            dist = SamplingDistribution.uniform(obj.n)
        errs = np.empty(trials)
        for t in range(trials):
            if m is None:
                e = (obj.full_gradient(x) - obj.full_gradient(x_star)) - (g_x - g_star)
            else:
                idx = dist.sample(m, rng)
                w = dist.weights(idx)
                e = obj.batch_gradient(idx, x, w) - obj.batch_gradient(idx, x_star, w) - (g_x - g_star)
            errs[t] = e @ fac.solve(e)
    qs = {q: float(np.quantile(errs / scale, q)) for q in (0.1, 0.5, 0.9)}
    return ProbeStats(mean=float(errs.mean() / scale), quantiles=qs,
                      raw_mean=float(errs.mean()), samples=errs / scale)
