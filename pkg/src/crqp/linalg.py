"""Dense linear-algebra kernel used by the solver.

Only the handful of operations the interior-point iteration needs: a Cholesky
factorization that reports failure instead of crashing, the matching
triangular solves, symmetric rank-one accumulation, and two norms.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack


class FactorizationError(np.linalg.LinAlgError):
    """Raised when a symmetric matrix is not numerically positive definite.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first pivot that was non-positive or
        non-finite.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"Cholesky factorization failed at pivot {self.pivot}")


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == M``."""

    lower: np.ndarray

    @property
    def order(self) -> int:
        return self.lower.shape[0]


def _as_square(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def cholesky_factor(M) -> CholFactor:
    """Factor a symmetric matrix as ``L @ L.T``.

    Only the lower triangle of `M` is read.

    Raises
    ------
    FactorizationError
        If a pivot is ``<= 0`` or not finite. The failing pivot index is
        carried on the exception so callers can decide how to regularize.
    """
    M = _as_square(M)
    n = M.shape[0]
    if n == 0:
        return CholFactor(np.zeros((0, 0)))
    tril = np.tril(M)
    bad = ~np.isfinite(tril)
    if bad.any():
        rows, cols = np.nonzero(bad)
        raise FactorizationError(int(min(rows.min(), cols.min())))
    L, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(info - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValueError(f"dpotrf: illegal value in argument {-info}")
    return CholFactor(L)


def cholesky_solve(fac: CholFactor, rhs) -> np.ndarray:
    """Solve ``M x = rhs`` given ``fac = cholesky_factor(M)``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != fac.order:
        raise ValueError(f"rhs has length {rhs.shape[0]}, factor has order {fac.order}")
    if fac.order == 0:
        return rhs.copy()
    x, info = lapack.dpotrs(fac.lower, rhs, lower=1)
    if info != 0:  # pragma: no cover
        raise ValueError(f"dpotrs: illegal value in argument {-info}")
    return x


def rank1_accumulate(M, a, w) -> np.ndarray:
    """Return ``M + w * outer(a, a)`` for a nonnegative weight `w`.

    ``a_i * a_j`` is commutative in floating point, so the result is exactly
    symmetric whenever `M` is.
    """
    M = _as_square(M)
    a = np.asarray(a, dtype=float)
    if a.shape != (M.shape[0],):
        raise ValueError(f"vector has shape {a.shape}, matrix has order {M.shape[0]}")
    if not np.isfinite(w) or w < 0:
        raise ValueError(f"weight must be finite and nonnegative, got {w}")
    return M + w * np.outer(a, a)


def vec_norm(v) -> float:
    """Euclidean norm of a vector."""
    return float(np.linalg.norm(np.asarray(v, dtype=float)))


def inf_norm(M) -> float:
    """Infinity norm: max absolute row sum for matrices, max magnitude for vectors."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        return float(np.max(np.abs(M)))
    return float(np.max(np.sum(np.abs(M), axis=1)))
