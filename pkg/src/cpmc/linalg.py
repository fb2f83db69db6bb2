"""Dense inversion of the small (rank-sized) local matrices.

The local Gauss-Newton matrices are r-by-r with r rarely above ~100, so the
solver inverts them explicitly by Gauss-Jordan elimination with partial
pivoting and multiplies, rather than factor-and-solve.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SingularMatrixError", "gauss_jordan_invert", "solve_local", "PIVOT_TOL"]

# Absolute pivot threshold below which a matrix is treated as singular.
PIVOT_TOL = 1e-12


class SingularMatrixError(RuntimeError):
    """Raised when elimination meets a pivot below the tolerance.

    ``column`` is the 1-based pivot column that failed.
    """

    def __init__(self, column: int, pivot: float, tol: float):
        super().__init__(
            f"singular matrix: pivot column {column} has magnitude {pivot:.3e} "
            f"below tolerance {tol:.3e}"
        )
        self.column = column


def gauss_jordan_invert(matrix: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Invert a square matrix by Gauss-Jordan elimination with row pivoting."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if pivot_tol <= 0:
        raise ValueError("pivot_tol must be positive")
    n = a.shape[0]
    work = np.hstack([a.copy(), np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(work[col:, col])))
        pivot = work[piv, col]
        if abs(pivot) < pivot_tol:
            raise SingularMatrixError(col + 1, abs(pivot), pivot_tol)
        if piv != col:
            work[[col, piv]] = work[[piv, col]]
        work[col] /= work[col, col]
        factors = work[:, col].copy()
        factors[col] = 0.0
        work -= np.outer(factors, work[col])
    return work[:, n:]


def solve_local(system, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Newton correction of one local system: inverse matrix times gradient."""
    return gauss_jordan_invert(system.hess, pivot_tol) @ system.grad
