"""Finite-sum objectives: l2-regularized logistic regression and least squares.

Both tasks are generalized linear models, so every component has the form
``psi_i(x) = phi(a_i^T x, y_i) + gamma/2 ||x||^2`` and its gradient and
Hessian are a scalar times ``a_i`` and ``a_i a_i^T`` plus the regularizer.
The regularizer lives in every component; importance weights rescale only
the data term, which keeps the expectation of a reweighted draw exactly
equal to the full objective.
"""

from __future__ import annotations

import contextlib
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from svrn.errors import ContractViolation, NotStronglyConvex


class Task(str, enum.Enum):
    LOGISTIC = "logistic"
    LEAST_SQUARES = "least_squares"


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    A: np.ndarray
    y: np.ndarray
    gamma: float
    task: Task

    def __post_init__(self):
        A = np.ascontiguousarray(self.A, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        task = Task(self.task)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ContractViolation(f"A must be a nonempty matrix, got shape {A.shape}")
        if y.shape[0] != A.shape[0]:
            raise ContractViolation(f"y has length {y.shape[0]}, expected {A.shape[0]}")
        if not self.gamma >= 0:
            raise ContractViolation(f"gamma must be nonnegative, got {self.gamma}")
        if task is Task.LOGISTIC and not np.all(np.abs(y) == 1.0):
            raise ContractViolation("logistic labels must be +1 or -1")
        A.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "task", task)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]


def _sigmoid(z):
    # exp(-|z|) never overflows
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check_index(inst: ProblemInstance, i: int) -> int:
    if not 0 <= i < inst.n:
        raise ContractViolation(f"component index {i} out of range [0, {inst.n})")
    return int(i)


def _check_task(inst: ProblemInstance, task: Task):
    if inst.task is not task:
        raise ContractViolation(f"expected a {task.value} instance, got {inst.task.value}")


def logistic_component_gradient(inst: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    _check_task(inst, Task.LOGISTIC)
    i = _check_index(inst, i)
    a, yi = inst.A[i], inst.y[i]
    return -yi * _sigmoid(-yi * (a @ x)) * a + inst.gamma * x


def logistic_component_hessian(inst: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    _check_task(inst, Task.LOGISTIC)
    i = _check_index(inst, i)
    a = inst.A[i]
    s = _sigmoid(a @ x)
    return s * (1.0 - s) * np.outer(a, a) + inst.gamma * np.eye(inst.d)


def lsq_component_gradient(inst: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    _check_task(inst, Task.LEAST_SQUARES)
    i = _check_index(inst, i)
    a = inst.A[i]
    return (a @ x - inst.y[i]) * a + inst.gamma * x


def lsq_component_hessian(inst: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    _check_task(inst, Task.LEAST_SQUARES)
    i = _check_index(inst, i)
    a = inst.A[i]
    return np.outer(a, a) + inst.gamma * np.eye(inst.d)


class Objective:
    """Finite-sum objective over a :class:`ProblemInstance`.

    Tracks how many component gradients and Hessians have been evaluated, so
    that optimizers can report cost in passes over the data
    (``grad_evals / n``). Batch methods take an optional ``weights`` array
    multiplying each drawn component's data term, e.g. ``1 / (n p_i)`` under
    importance sampling.
    """

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self.grad_evals = 0
        self.hess_evals = 0
        self._counting = True

    @property
    def n(self) -> int:
        return self.inst.n

    @property
    def d(self) -> int:
        return self.inst.d

    @property
    def gamma(self) -> float:
        return self.inst.gamma

    @property
    def passes(self) -> float:
        return self.grad_evals / self.n

    @contextlib.contextmanager
    def uncounted(self):
        """Evaluate diagnostics without charging them to the cost counters."""
        prev = self._counting
        self._counting = False
        try:
            yield self
        finally:
            self._counting = prev

    def _charge_grad(self, k):
        if self._counting:
            self.grad_evals += k

    def _charge_hess(self, k):
        if self._counting:
            self.hess_evals += k

    # scalar link functions: data_i(x) = phi(z_i), z_i = a_i^T x
    def _phi(self, z, y):
        if self.inst.task is Task.LOGISTIC:
            return np.logaddexp(0.0, -y * z)
        return 0.5 * (z - y) ** 2

    def _dphi(self, z, y):
        if self.inst.task is Task.LOGISTIC:
            return -y * _sigmoid(-y * z)
        return z - y

    def _d2phi(self, z, y):
        if self.inst.task is Task.LOGISTIC:
            s = _sigmoid(z)
            return s * (1.0 - s)
        return np.ones_like(z)

    def loss(self, x: np.ndarray) -> float:
        A, y = self.inst.A, self.inst.y
        return float(np.mean(self._phi(A @ x, y)) + 0.5 * self.gamma * (x @ x))

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        A, y = self.inst.A, self.inst.y
        self._charge_grad(self.n)
        return A.T @ self._dphi(A @ x, y) / self.n + self.gamma * x

    def full_hessian(self, x: np.ndarray) -> np.ndarray:
        A, y = self.inst.A, self.inst.y
        self._charge_hess(self.n)
        c = self._d2phi(A @ x, y)
        H = (A.T * c) @ A / self.n
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += self.gamma
        return H

    def component_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        i = _check_index(self.inst, i)
        self._charge_grad(1)
        a = self.inst.A[i]
        return self._dphi(a @ x, self.inst.y[i]) * a + self.gamma * x

    def component_hessian(self, i: int, x: np.ndarray) -> np.ndarray:
        i = _check_index(self.inst, i)
        self._charge_hess(1)
        a = self.inst.A[i]
        c = self._d2phi(np.atleast_1d(a @ x), np.atleast_1d(self.inst.y[i]))[0]
        return c * np.outer(a, a) + self.gamma * np.eye(self.d)

    def batch_gradient(self, indices, x: np.ndarray, weights=None) -> np.ndarray:
        """``(1/k) sum_j w_j grad data_{i_j}(x) + gamma x`` over the drawn indices."""
        idx = np.asarray(indices)
        k = idx.shape[0]
        if k == 0:
            raise ContractViolation("empty batch")
        Ab = self.inst.A[idx]
        r = self._dphi(Ab @ x, self.inst.y[idx])
        if weights is not None:
            r = r * weights
        self._charge_grad(k)
        return Ab.T @ r / k + self.gamma * x

    def batch_hessian(self, indices, x: np.ndarray, weights=None) -> np.ndarray:
        idx = np.asarray(indices)
        k = idx.shape[0]
        if k == 0:
            raise ContractViolation("empty batch")
        Ab = self.inst.A[idx]
        c = self._d2phi(Ab @ x, self.inst.y[idx])
        if weights is not None:
            c = c * weights
        self._charge_hess(k)
        H = (Ab.T * c) @ Ab / k
        H = 0.5 * (H + H.T)
        H[np.diag_indices_from(H)] += self.gamma
        return H


class Conditioning(NamedTuple):
    mu: float
    lam: float
    kappa: float
    lam_data: float  # smoothness without the regularizer


def strong_smooth_estimates(inst: ProblemInstance, x: np.ndarray | None = None) -> Conditioning:
    """Strong convexity, component smoothness and condition number.

    Least squares: exact values. Logistic: the smoothness uses the 1/4
    curvature cap, and the strong convexity is the smallest Hessian
    eigenvalue at ``x`` (default: the origin, where the curvature is 1/4).
    Pass the best known iterate for a local estimate; it is a diagnostic,
    not a global certificate.
    """
    if inst.n * inst.d > 10**8:
        raise ContractViolation("instance too large for a dense eigendecomposition")
    row_sq = np.einsum("ij,ij->i", inst.A, inst.A)
    if inst.task is Task.LEAST_SQUARES:
        lam_data = float(row_sq.max())
        H = inst.A.T @ inst.A / inst.n
    else:
        lam_data = 0.25 * float(row_sq.max())
        obj = Objective(inst)
        x0 = np.zeros(inst.d) if x is None else np.asarray(x, dtype=float)
        H = obj.full_hessian(x0)
        H[np.diag_indices_from(H)] -= inst.gamma
    mu = float(np.linalg.eigvalsh(0.5 * (H + H.T))[0]) + inst.gamma
    if mu <= 0:
        raise NotStronglyConvex(f"smallest Hessian eigenvalue is {mu}")
    lam = lam_data + inst.gamma
    return Conditioning(mu=mu, lam=lam, kappa=lam / mu, lam_data=lam_data)


def load_csv(path: str | Path, task: Task | str, gamma: float) -> ProblemInstance:
    """Read header-free ``y,a_1,...,a_d`` rows; logistic labels map to +-1."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    y, A = data[:, 0], data[:, 1:]
    task = Task(task)
    if task is Task.LOGISTIC:
        labels = np.unique(y)
        if labels.size > 2:
            raise ContractViolation(f"logistic task needs two classes, found {labels.size}")
        # the larger label becomes +1 (so {0,1} and {-1,1} both work)
        y = np.where(y == labels.max(), 1.0, -1.0)
    return ProblemInstance(A=A, y=y, gamma=gamma, task=task)


def save_csv(inst: ProblemInstance, path: str | Path) -> None:
    np.savetxt(path, np.column_stack([inst.y, inst.A]), delimiter=",", fmt="%.17g")
