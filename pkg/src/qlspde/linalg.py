"""Cyclic tridiagonal solves for periodic three-point operators."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


class SolveError(ArithmeticError):
    pass


def cyclic_matvec(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``y_j = lower_j x_{j-1} + diag_j x_j + upper_j x_{j+1}`` with periodic indices."""
    return lower * np.roll(x, 1) + diag * x + upper * np.roll(x, -1)


def solve_cyclic(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the periodic tridiagonal system of :func:`cyclic_matvec`.

    Sherman-Morrison reduces the corner entries to a rank-one update of a
    banded matrix, which LAPACK solves directly.
    """
    n = diag.size
    if n < 3:
        raise SolveError("cyclic solve needs at least three unknowns")
    if not np.any(rhs):
        return np.zeros(n)
    gamma = -diag[0] if diag[0] != 0.0 else -1.0
    corner_lo = lower[0]  # row 0, column n-1
    corner_hi = upper[-1]  # row n-1, column 0
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[1, 0] -= gamma
    ab[1, -1] -= corner_lo * corner_hi / gamma
    ab[2, :-1] = lower[1:]
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = corner_hi
    try:
        sol = solve_banded((1, 1), ab, np.column_stack((rhs, u)), check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveError(f"banded solve failed: {exc}") from None
    y, z = sol[:, 0], sol[:, 1]
    denom = 1.0 + z[0] + corner_lo * z[-1] / gamma
    if denom == 0.0 or not np.isfinite(denom):
        raise SolveError("singular cyclic system")
    x = y - (y[0] + corner_lo * y[-1] / gamma) / denom * z
    if not np.all(np.isfinite(x)):
        raise SolveError("non-finite solution of cyclic system")
    # ||A|| ||x|| / ||b|| bounds the condition number from below
    a_norm = np.max(np.abs(lower) + np.abs(diag) + np.abs(upper))
    b_norm = np.max(np.abs(rhs))
    if a_norm * np.max(np.abs(x)) > 1e12 * b_norm:
        raise SolveError("cyclic system is numerically singular")
    return x
