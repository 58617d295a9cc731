"""Dense linear-algebra kernel.

Vectors and matrices are plain ``numpy.ndarray`` objects of dtype float64.
``as_vector`` / ``as_matrix`` are the validation entry points; everything
else assumes validated input. All norms are infinity norms.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, SingularMatrix

__all__ = [
    "LuFactorization",
    "as_vector",
    "as_matrix",
    "lu_factor",
    "lu_solve",
    "inf_norm",
    "hadamard",
]

#: relative pivot threshold, scaled by ||A||_inf
SINGULAR_RTOL = 1e-13


def as_vector(x, name="x"):
    """Return ``x`` as a finite 1-D float64 array (copying only if needed)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(a, name="A"):
    """Return ``a`` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class LuFactorization:
    """Packed LU factors with LAPACK-style row interchanges.

    ``lu`` holds the unit lower factor below the diagonal and ``U`` on and
    above it; ``piv[i]`` is the row swapped with row ``i`` during
    elimination.
    """

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self):
        return self.lu.shape[0]

    @property
    def perm(self):
        """Row permutation ``p`` such that ``A[p] == L @ U``."""
        p = np.arange(self.n)
        for i, j in enumerate(self.piv):
            p[i], p[j] = p[j], p[i]
        return p

    @property
    def L(self):
        return np.tril(self.lu, -1) + np.eye(self.n)

    @property
    def U(self):
        return np.triu(self.lu)


def lu_factor(a) -> LuFactorization:
    """Factor a square matrix with partial (row) pivoting.

    Raises
    ------
    SingularMatrix
        If some pivot of ``U`` has magnitude below ``1e-13 * ||A||_inf``.
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionMismatch(f"matrix must be square, got {a.shape}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    threshold = SINGULAR_RTOL * inf_norm(a)
    bad = np.flatnonzero(~(pivots > threshold))
    if bad.size:
        raise SingularMatrix(
            f"pivot {bad[0]} has magnitude {pivots[bad[0]]:.3e} <= {threshold:.3e}"
        )
    return LuFactorization(lu=lu, piv=piv)


def lu_solve(f: LuFactorization, b):
    """Solve ``A x = b`` from a factorization; ``b`` may hold several columns."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim not in (1, 2) or b.shape[0] != f.n:
        raise DimensionMismatch(f"right-hand side of shape {b.shape} for n={f.n}")
    if b.ndim == 2:
        # column by column so every column is bitwise equal to a single solve
        return np.column_stack([lu_solve(f, col) for col in b.T]) if b.shape[1] else b.copy()
    return scipy.linalg.lu_solve((f.lu, f.piv), b, check_finite=False)


def inf_norm(x) -> float:
    """Max absolute entry of a vector, max absolute row sum of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    if x.ndim <= 1:
        return float(np.max(np.abs(x)))
    if x.ndim == 2:
        return float(np.max(np.sum(np.abs(x), axis=1)))
    raise DimensionMismatch(f"inf_norm expects a vector or matrix, got ndim={x.ndim}")


def hadamard(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    return x * y
