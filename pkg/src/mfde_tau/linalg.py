"""Dense LU solve with one refinement pass and diagnostics."""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

PIVOT_RTOL = 1e-13


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, column: int, pivot: float, threshold: float):
        self.column = column
        self.pivot = pivot
        super().__init__(
            f"matrix is singular to working precision: pivot {pivot:.3e} in column {column} "
            f"is below {threshold:.3e}"
        )


@dataclass(frozen=True)
class SolveDiagnostics:
    residual_inf: float
    relative_residual: float
    min_pivot: float
    cond_estimate: float
    elapsed: float
    refined: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _relres(A, x, b, anorm):
    r = b - A @ x
    rn = float(np.abs(r).max()) if r.size else 0.0
    denom = anorm * float(np.abs(x).max(initial=0.0)) + float(np.abs(b).max(initial=0.0))
    return r, rn, (rn / denom if denom > 0 else 0.0)


def equilibration(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row then column scale factors making every row and column max equal 1.

    Powers of two are used so the scaling itself introduces no rounding.
    """
    def pow2(v):
        v = np.where(v > 0, v, 1.0)
        return np.exp2(-np.round(np.log2(v)))

    r = pow2(np.abs(A).max(axis=1, initial=0.0))
    c = pow2(np.abs(A * r[:, None]).max(axis=0, initial=0.0))
    return r, c


def lu_solve(matrix, rhs, *, pivot_rtol: float = PIVOT_RTOL) -> tuple[np.ndarray, SolveDiagnostics]:
    """Solve ``matrix @ x = rhs`` by LU with partial pivoting.

    The system is first equilibrated by row and column scaling, so the
    singularity test and the condition estimate refer to the scaled matrix
    ``R A C``. One iterative-refinement step is taken and kept only if it does
    not raise the residual of the original system.

    Raises:
        SingularSystemError: if a pivot of the scaled factorization falls below
            ``pivot_rtol * ||R A C||_inf``.
    """
    start = time.perf_counter()
    A = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise ValueError(f"need a square system, got A{A.shape} and b{b.shape}")
    if A.size == 0:
        raise ValueError("empty system")
    r, c = equilibration(A)
    S = A * r[:, None] * c[None, :]
    snorm_inf = float(np.abs(S).sum(axis=1).max())
    snorm_1 = float(np.abs(S).sum(axis=0).max())
    anorm_inf = float(np.abs(A).sum(axis=1).max())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)  # singularity is reported below
        lu, piv = sla.lu_factor(S, check_finite=True)
    pivots = np.abs(np.diag(lu))
    threshold = pivot_rtol * snorm_inf
    col = int(np.argmin(pivots))
    if pivots[col] < threshold or pivots[col] == 0:
        raise SingularSystemError(col, float(pivots[col]), threshold)

    def solve(v):
        return c * sla.lu_solve((lu, piv), r * v)

    x = solve(b)
    res, rn, rel = _relres(A, x, b, anorm_inf)
    x2 = x + solve(res)
    _, rn2, rel2 = _relres(A, x2, b, anorm_inf)
    refined = rel2 <= rel
    if refined:
        x, rn, rel = x2, rn2, rel2

    rcond, info = lapack.dgecon(lu, snorm_1, norm="1")
    cond = float(1.0 / rcond) if info == 0 and rcond > 0 else float("inf")
    diag = SolveDiagnostics(
        residual_inf=rn,
        relative_residual=rel,
        min_pivot=float(pivots[col]),
        cond_estimate=cond,
        elapsed=time.perf_counter() - start,
        refined=bool(refined),
    )
    return x, diag
