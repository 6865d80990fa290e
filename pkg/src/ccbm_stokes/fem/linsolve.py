"""Direct sparse solves (SuperLU) with a residual check."""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SingularMatrixError

RESIDUAL_TOL = 1e-10


def factorize(matrix):
    try:
        return splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise SingularMatrixError(f"LU factorisation failed: {exc}") from exc


def solve_sparse(matrix, rhs, factor=None, tol=RESIDUAL_TOL):
    """Solve ``matrix @ x = rhs``; one refinement step if the residual is large."""
    rhs = np.asarray(rhs)
    dtype = np.result_type(matrix.dtype, rhs.dtype)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return np.zeros(matrix.shape[1], dtype=dtype)
    lu = factor if factor is not None else factorize(matrix.astype(dtype))
    x = lu.solve(rhs.astype(dtype))
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution (singular matrix?)")
    r = rhs - matrix @ x
    for _ in range(2):
        if np.linalg.norm(r) <= tol * bnorm:
            break
        x = x + lu.solve(r.astype(dtype))
        r = rhs - matrix @ x
    rel = np.linalg.norm(r) / bnorm
    if rel > tol:
        raise SingularMatrixError(f"relative residual {rel:.3e} exceeds {tol:g}")
    return x


def solve(system):
    """Solve an assembled :class:`ComplexSparseSystem`; returns the reduced vector."""
    return solve_sparse(system.matrix, system.rhs)
