"""Direct solution of the assembled symmetric positive definite systems."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

__all__ = ["LinearSolveError", "solve_spd"]


class LinearSolveError(RuntimeError):
    """The direct solve failed or did not meet the residual tolerance."""


def solve_spd(matrix, rhs, tol=1e-10) -> np.ndarray:
    """Solve A x = b for symmetric positive definite sparse A.

    Uses a sparse direct factorization and verifies the relative residual
    ||A x - b|| <= tol * ||b|| afterwards (with b = 0 returning x = 0).

    Raises
    ------
    LinearSolveError
        On non-finite results or a residual above tolerance.
    ValueError
        On shape mismatch or a visibly unsymmetric matrix.
    """
    matrix = sps.csc_matrix(matrix)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    if rhs.shape != (n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({n},)")
    if n == 0:
        return np.zeros(0)
    scale = np.max(np.abs(matrix.data)) if matrix.nnz else 0.0
    asym = np.abs(matrix - matrix.T)
    if asym.nnz and asym.max() > 1e-8 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")

    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(n)
    x = spla.spsolve(matrix, rhs)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("direct solve produced non-finite values")
    residual = float(np.linalg.norm(matrix @ x - rhs))
    if residual > tol * rhs_norm:
        raise LinearSolveError(
            f"relative residual {residual / rhs_norm:.3e} exceeds tol {tol:.1e}"
        )
    return x
