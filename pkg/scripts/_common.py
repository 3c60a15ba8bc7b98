"""Shared helpers for the experiment scripts."""

import numpy as np

from svrn.harness import SyntheticSpec, compute_reference, gen_synthetic
from svrn.problem import Objective


def problem(n, d, seed=0, **kwargs):
    inst = gen_synthetic(SyntheticSpec(n=n, d=d, seed=seed, **kwargs))
    obj = Objective(inst)
    x_star, H = compute_reference(obj)
    return inst, obj, x_star, H


def passes_to(trace, tol):
    hit = trace.passes[trace.errors <= tol]
    return float(hit.min()) if hit.size else float("inf")


def mean_ratio(trace):
    e = trace.errors
    if not np.isfinite(e[-1]) or len(e) < 2:
        return float("inf")
    return float((e[-1] / e[0]) ** (1.0 / (len(e) - 1)))
