"""Dense symmetric linear algebra helpers.

Cholesky factorizations for repeated Hessian solves, norms induced by a PSD
matrix, the two-sided spectral approximation test, and an orthonormal fast
Walsh-Hadamard transform.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from svrn.errors import ContractViolation, NotPositiveDefinite


@dataclass(frozen=True)
class SpdFactorization:
    """Lower Cholesky factor ``L`` of ``M = L @ L.T``; immutable, safe to share."""

    M: np.ndarray
    L: np.ndarray

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def solve(self, g: np.ndarray) -> np.ndarray:
        """Return ``M^{-1} g`` using two triangular solves."""
        return scipy.linalg.cho_solve((self.L, True), g, check_finite=False)


def spd_factor(M: np.ndarray) -> SpdFactorization:
    """Factor a symmetric positive definite matrix.

    Raises :class:`NotPositiveDefinite` on a nonpositive pivot (or non-finite
    input) and :class:`ContractViolation` if ``M`` is not symmetric.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        raise ContractViolation("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    M = M.copy()
    M.setflags(write=False)
    L.setflags(write=False)
    return SpdFactorization(M=M, L=L)


def h_norm(M: np.ndarray, v: np.ndarray) -> float:
    """The norm ``sqrt(v^T M v)`` induced by a PSD matrix."""
    q = float(v @ (M @ v))
    if q < -1e-12:
        raise ContractViolation(f"v^T M v = {q} is negative; M is not PSD")
    return float(np.sqrt(max(q, 0.0)))


def spectral_approx(A: np.ndarray, B: np.ndarray, eps: float) -> tuple[bool, float]:
    """Check ``(1 - eps) B <= A <= (1 + eps) B`` in the PSD order.

    Returns ``(holds, eps_actual)`` where ``eps_actual`` is the largest
    deviation from 1 among the eigenvalues of ``B^{-1/2} A B^{-1/2}``.
    """
    fac = spd_factor(B)
    A = np.asarray(A, dtype=float)
    # L^{-1} A L^{-T} has the same spectrum as B^{-1/2} A B^{-1/2}
    X = scipy.linalg.solve_triangular(fac.L, A, lower=True)
    C = scipy.linalg.solve_triangular(fac.L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    w = np.linalg.eigvalsh(C)
    eps_actual = float(np.max(np.abs(w - 1.0)))
    return eps_actual <= eps, eps_actual


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def fwht(v: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform along axis 0.

    Works on a vector or on the columns of a matrix. The leading dimension
    must be a power of two. Output is in Sylvester (natural) order, i.e. it
    equals ``scipy.linalg.hadamard(n) @ v / sqrt(n)``.
    """
    a = np.array(v, dtype=float, copy=True)
    n = a.shape[0]
    if not is_power_of_two(n):
        raise ContractViolation(f"length {n} is not a power of two")
    rest = a.shape[1:]
    h = 1
    while h < n:
        view = a.reshape((n // (2 * h), 2, h) + rest)
        top = view[:, 0].copy()
        view[:, 0] += view[:, 1]
        np.subtract(top, view[:, 1], out=view[:, 1])
        h *= 2
    a *= 1.0 / np.sqrt(n)
    return a
