"""Piecewise polynomial solutions: extraction, evaluation and error checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .assemble import PerturbationSpec, TauSystem
from .linalg import SolveDiagnostics
from .poly import Poly, compose_affine, differentiate, mul
from .problem import DiscretizedProblem, MfdeProblem

NODES_PER_STEP = 128
CONTINUITY_RTOL = 1e-9


class ContinuityError(RuntimeError):
    pass


@dataclass(frozen=True)
class TauSolution:
    """X_k(s), s in [0, 1], for steps k = 0 .. K-2, plus the tau parameters."""

    K: int
    n: int
    d: int
    steps: tuple[Poly, ...]
    taus: tuple[np.ndarray, ...]
    path: str = "direct"
    diagnostics: Optional[SolveDiagnostics] = None

    def in_t(self, k: int) -> Poly:
        """Step ``k`` rewritten in the original variable t = s + k."""
        return compose_affine(self.steps[k], 1.0, -float(k))


def _links(sol: TauSolution, left, right_value: float) -> list[tuple[float, float, float]]:
    """(X_k(0), X_{k-1}(1), magnitude of the summed coefficients) for the K links.

    ``left`` is the boundary piece on [-1, 0] in the step variable, or just its
    value at s = 1.
    """
    def far_end(p) -> tuple[float, float]:
        if not isinstance(p, Poly):
            return float(p), abs(float(p))
        return p(1.0), float(np.abs(p.coeffs).sum())

    links = [(sol.steps[0](0.0), *far_end(left))]
    for k in range(1, sol.K - 1):
        links.append((sol.steps[k](0.0), *far_end(sol.steps[k - 1])))
    value, mag = far_end(sol.steps[-1])
    links.append((right_value, value, mag))
    return links


def continuity_defects(sol: TauSolution, left, right_value: float) -> np.ndarray:
    """Defects of the K continuity links, each relative to its terms.

    A link compares X_k(0) with X_{k-1}(1) = sum_i a_i^(k-1); the defect is
    ``|X_k(0) - X_{k-1}(1)| / (1 + sum_i |a_i^(k-1)|)``, so cancellation among
    large power coefficients is not mistaken for a broken link.
    """
    return np.array([abs(u - v) / (1.0 + mag) for u, v, mag in _links(sol, left, right_value)])


def value_defects(sol: TauSolution, left, right_value: float) -> np.ndarray:
    """The same links measured against the value: ``|X_k(0) - X_{k-1}(1)| / (1 + |X_k(0)|)``."""
    return np.array([abs(u - v) / (1.0 + abs(u)) for u, v, _ in _links(sol, left, right_value)])


def extract(x, system: TauSystem, *, check: bool = True, rtol: float = CONTINUITY_RTOL) -> TauSolution:
    """Route the solution vector into per-step polynomials and tau blocks."""
    idx = system.index
    x = np.asarray(x, dtype=float)
    if x.shape != (idx.size,):
        raise ValueError(f"solution vector has shape {x.shape}, expected ({idx.size},)")
    steps = tuple(Poly(x[idx.coef_slice(k)]) for k in range(idx.steps))
    taus = tuple(np.array(x[idx.tau_slice(k)]) for k in range(idx.steps))
    sol = TauSolution(idx.K, idx.n, idx.d, steps, taus, system.path)
    if check:
        w = system.rhs[system.layout["continuity"] :]
        if system.row_scale is not None:
            w = w / system.row_scale[system.layout["continuity"] :]
        defects = continuity_defects(sol, float(w[0]), w[-1])
        worst = int(np.argmax(defects))
        if defects[worst] > rtol:
            raise ContinuityError(f"continuity link {worst} violated by {defects[worst]:.3e}")
    return sol


def with_diagnostics(sol: TauSolution, diag: SolveDiagnostics) -> TauSolution:
    return TauSolution(sol.K, sol.n, sol.d, sol.steps, sol.taus, sol.path, diag)


def eval_at(sol: TauSolution, problem: MfdeProblem, t):
    """Evaluate the piecewise solution on [-1, K].

    [-1, 0] uses psi1, (K-1, K] uses psi2 and (k, k+1] uses X_k(t - k).
    """
    tt = np.asarray(t, dtype=float)
    K = sol.K
    if np.any(~np.isfinite(tt)) or np.any(tt < -1) or np.any(tt > K):
        raise ValueError(f"t must lie in [-1, {K}]")
    flat = np.atleast_1d(tt).ravel()
    out = np.empty_like(flat)
    left = flat <= 0
    right = flat > K - 1
    mid = ~(left | right)
    if np.any(left):
        out[left] = ex.evaluate(problem.psi1, flat[left])
    if np.any(right):
        out[right] = ex.evaluate(problem.psi2, flat[right])
    if np.any(mid):
        k = np.ceil(flat[mid]).astype(int) - 1
        vals = np.empty(k.size)
        for step in np.unique(k):
            sel = k == step
            vals[sel] = sol.steps[step](flat[mid][sel] - step)
        out[mid] = vals
    if tt.ndim == 0:
        return float(out[0])
    return out.reshape(tt.shape)


def step_of(t: float, K: int) -> Optional[int]:
    """Step index owning ``t`` (None on the boundary pieces)."""
    if t <= 0 or t > K - 1:
        return None
    return int(math.ceil(t)) - 1


@dataclass(frozen=True)
class ErrorReport:
    per_subinterval: tuple[float, ...]
    global_error: float
    nodes_per_subinterval: int = NODES_PER_STEP

    def to_dict(self) -> dict:
        return {
            "per_subinterval": list(self.per_subinterval),
            "global": self.global_error,
            "nodes_per_subinterval": self.nodes_per_subinterval,
        }


def grid(K: int, nodes: int = NODES_PER_STEP) -> np.ndarray:
    """Nodes k + i/nodes, i = 1..nodes, for every step (right-closed subintervals)."""
    s = np.arange(1, nodes + 1) / nodes
    return np.concatenate([k + s for k in range(K - 1)])


def error_report(sol: TauSolution, problem: MfdeProblem, nodes: int = NODES_PER_STEP) -> ErrorReport:
    if problem.exact is None:
        raise ValueError("error report needs a problem with an exact solution")
    s = np.arange(1, nodes + 1) / nodes
    errs = []
    for k, Xk in enumerate(sol.steps):
        exact = ex.evaluate(problem.exact, k + s)
        errs.append(float(np.max(np.abs(Xk(s) - exact))))
    return ErrorReport(tuple(errs), max(errs), nodes)


def step_residual(sol: TauSolution, disc: DiscretizedProblem, k: int) -> tuple[Poly, float]:
    """X_k' - a_k X_k - b_k X_{k-1} - c_k X_{k+1} - H_k and the largest term coefficient."""
    spec = PerturbationSpec(sol.K, sol.n, sol.d)
    prev = disc.left if k == 0 else sol.steps[k - 1]
    nxt = disc.right if k == sol.K - 2 else sol.steps[k + 1]
    terms = [
        differentiate(sol.steps[k]),
        -mul(disc.a[k], sol.steps[k]),
        -mul(disc.b[k], prev),
        -mul(disc.c[k], nxt),
        -spec.term(k, sol.taus[k]),
    ]
    total = terms[0]
    for p in terms[1:]:
        total = total + p
    scale = max(float(np.abs(p.coeffs).max()) for p in terms)
    return total, scale


def perturbed_residual(sol: TauSolution, disc: DiscretizedProblem, *, relative: bool = False) -> np.ndarray:
    """Per-step infinity norm of the perturbed-equation coefficient residual.

    With ``relative=True`` each entry is divided by ``1 + (largest term coefficient)``.
    """
    out = []
    for k in range(sol.K - 1):
        poly, scale = step_residual(sol, disc, k)
        r = float(np.abs(poly.coeffs).max())
        out.append(r / (1.0 + scale) if relative else r)
    return np.array(out)


@dataclass(frozen=True)
class PathComparison:
    coef_diff: tuple[float, ...]
    value_diff: tuple[float, ...]
    paths: tuple[str, str] = ("direct", "canonical")
    max_coef_diff: float = field(init=False)
    max_value_diff: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "max_coef_diff", max(self.coef_diff, default=0.0))
        object.__setattr__(self, "max_value_diff", max(self.value_diff, default=0.0))

    def to_dict(self) -> dict:
        return {
            "paths": list(self.paths),
            "coef_diff": list(self.coef_diff),
            "value_diff": list(self.value_diff),
            "max_coef_diff": self.max_coef_diff,
            "max_value_diff": self.max_value_diff,
        }


def compare_paths(first: TauSolution, second: TauSolution, nodes: int = NODES_PER_STEP) -> PathComparison:
    """Per-step differences of coefficients and of values on the evaluation grid."""
    if (first.K, first.n) != (second.K, second.n):
        raise ValueError("solutions have different shapes")
    s = np.arange(1, nodes + 1) / nodes
    coef, vals = [], []
    for p, q in zip(first.steps, second.steps):
        coef.append(float(np.abs(p.coeffs - q.coeffs).max()))
        vals.append(float(np.abs(p(s) - q(s)).max()))
    return PathComparison(tuple(coef), tuple(vals), (first.path, second.path))
