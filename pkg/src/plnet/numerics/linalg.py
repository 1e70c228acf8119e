"""Dense linear-algebra helpers (LAPACK-backed)."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from ..errors import NumericalError

RCOND_FLOOR = 1e-12


def lu_factor(a: np.ndarray, rcond_floor: float = RCOND_FLOOR):
    """LU factorization with partial pivoting; refuses near-singular input."""
    lu, piv = sla.lu_factor(a, check_finite=False)
    anorm = np.abs(a).sum(axis=0).max() if a.size else 0.0
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < rcond_floor:
        raise NumericalError(f"matrix is singular to working precision (rcond={rcond:.3e})")
    return lu, piv


def lu_solve(factor, b: np.ndarray, trans: bool = False) -> np.ndarray:
    return sla.lu_solve(factor, b, trans=1 if trans else 0, check_finite=False)


def min_eig(sym: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (symmetrized first)."""
    if sym.size == 0:
        return np.inf
    s = 0.5 * (sym + sym.T)
    return float(np.linalg.eigvalsh(s)[0])


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0
