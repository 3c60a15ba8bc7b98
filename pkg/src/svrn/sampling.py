"""Index sampling, leverage scores, and randomized Hadamard preconditioning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from svrn.errors import ContractViolation, RankDeficient
from svrn.linalg import fwht, next_power_of_two


def uniform_batch(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` i.i.d. uniform indices in ``[0, n)``, drawn with replacement."""
    if m < 1:
        raise ContractViolation(f"batch size must be positive, got {m}")
    if n < 1:
        raise ContractViolation(f"population must be nonempty, got n={n}")
    return rng.integers(0, n, size=m)


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """A probability vector over ``n`` components with an inverse-CDF sampler.

    A component drawn with probability ``p_i`` has its data term reweighted
    by ``1 / (n p_i)``; for the uniform distribution the weight is 1 and
    :meth:`weights` returns ``None`` so callers can skip the multiply.
    """

    p: np.ndarray
    cdf: np.ndarray
    is_uniform: bool = False

    @classmethod
    def uniform(cls, n: int) -> "SamplingDistribution":
        p = np.full(n, 1.0 / n)
        cdf = np.arange(1, n + 1) / n
        return cls(p=p, cdf=cdf, is_uniform=True)

    @classmethod
    def from_probabilities(cls, p) -> "SamplingDistribution":
        p = np.asarray(p, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ContractViolation("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ContractViolation(f"probabilities sum to {p.sum()}, not 1")
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        return cls(p=p, cdf=cdf)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_uniform:
            return uniform_batch(self.n, m, rng)
        if m < 1:
            raise ContractViolation(f"batch size must be positive, got {m}")
        u = rng.random(m)
        idx = np.searchsorted(self.cdf, u, side="right")
        return np.minimum(idx, self.n - 1)

    def weights(self, idx: np.ndarray) -> np.ndarray | None:
        if self.is_uniform:
            return None
        return 1.0 / (self.n * self.p[idx])


def leverage_scores(A: np.ndarray) -> np.ndarray:
    """Exact row leverage scores ``a_i^T (A^T A)^{-1} a_i`` via thin QR."""
    A = np.asarray(A, dtype=float)
    n, d = A.shape
    if n < d:
        raise RankDeficient(f"{n}x{d} matrix cannot have full column rank")
    Q, R = np.linalg.qr(A, mode="reduced")
    r = np.abs(np.diag(R))
    if r.min() <= max(n, d) * np.finfo(float).eps * r.max():
        raise RankDeficient("matrix is numerically rank deficient")
    return np.clip(np.einsum("ij,ij->i", Q, Q), 0.0, 1.0)


def leverage_distribution(scores: np.ndarray) -> SamplingDistribution:
    """Sample proportionally to leverage scores: ``p_i = l_i / sum_j l_j``."""
    scores = np.asarray(scores, dtype=float)
    if np.any(scores < 0):
        raise ContractViolation("leverage scores must be nonnegative")
    total = scores.sum()
    if not total > 0:
        raise ContractViolation("leverage scores are all zero")
    return SamplingDistribution.from_probabilities(scores / total)


@dataclass(frozen=True, eq=False)
class RhtTransform:
    """``H D`` with zero padding to ``n_pad`` rows; ``H`` orthonormal Hadamard."""

    signs: np.ndarray
    n_pad: int
    n: int

    def apply(self, M: np.ndarray) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        if M.shape[0] != self.n:
            raise ContractViolation(f"expected {self.n} rows, got {M.shape[0]}")
        padded = np.zeros((self.n_pad,) + M.shape[1:])
        padded[: self.n] = M
        signs = self.signs.reshape((-1,) + (1,) * (M.ndim - 1))
        return fwht(padded * signs)


def rht_apply(A: np.ndarray, y: np.ndarray, rng: np.random.Generator):
    """Randomized Hadamard transform of a least-squares problem.

    Returns ``(A_t, y_t, transform)`` with ``||A_t x - y_t|| = ||A x - y||``
    for every ``x``. Rows are zero-padded to the next power of two.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d = A.shape
    n_pad = next_power_of_two(n)
    signs = 2.0 * rng.integers(0, 2, size=n_pad) - 1.0
    tr = RhtTransform(signs=signs, n_pad=n_pad, n=n)
    out = tr.apply(np.column_stack([A, y]))
    return out[:, :d], out[:, d], tr


def subsampled_hessian(obj, x: np.ndarray, k: int, dist: SamplingDistribution | None,
                       rng: np.random.Generator) -> np.ndarray:
    """Average of ``k`` sampled (reweighted) component Hessians at ``x``."""
    if k < 1:
        raise ContractViolation(f"Hessian sample size must be positive, got {k}")
    if dist is None:
        dist = SamplingDistribution.uniform(obj.n)
    idx = dist.sample(k, rng)
    return obj.batch_hessian(idx, x, dist.weights(idx))
