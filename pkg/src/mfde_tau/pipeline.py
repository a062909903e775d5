"""discretize -> assemble -> solve -> extract -> report, as one call."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from . import assemble as asm
from .linalg import lu_solve
from .problem import DiscretizedProblem, MfdeProblem, discretize
from .solution import (
    ErrorReport,
    PathComparison,
    TauSolution,
    compare_paths,
    error_report,
    extract,
    perturbed_residual,
    with_diagnostics,
)

log = logging.getLogger(__name__)

PATH_CHOICES = ("direct", "canonical", "auto")


@dataclass(frozen=True)
class Run:
    problem: MfdeProblem
    disc: DiscretizedProblem
    system: asm.TauSystem
    solution: TauSolution
    residual: tuple[float, ...]
    errors: Optional[ErrorReport] = None
    comparison: Optional[PathComparison] = None

    @property
    def path(self) -> str:
        return self.system.path

    def to_dict(self) -> dict:
        sol = self.solution
        out = {
            "problem": self.problem.describe(),
            "K": sol.K,
            "n": sol.n,
            "d": sol.d,
            "path": self.path,
            "order": self.system.order,
            "steps": [
                {"k": k, "coefficients": X.coeffs.tolist(), "tau": tau.tolist()}
                for k, (X, tau) in enumerate(zip(sol.steps, sol.taus))
            ],
            "perturbed_residual": list(self.residual),
            "diagnostics": {
                key: val for key, val in sol.diagnostics.to_dict().items() if key != "elapsed"
            },
        }
        if self.errors is not None:
            out["errors"] = self.errors.to_dict()
        if self.comparison is not None:
            out["comparison"] = self.comparison.to_dict()
        return out


def _canonical_admissible(disc: DiscretizedProblem) -> bool:
    if disc.d == 0:
        return all(ak[0] != 0 for ak in disc.a)
    try:
        asm.canonical_tables(disc)
    except (asm.AssemblyError, ValueError):
        return False
    return True


def solve_discretized(disc: DiscretizedProblem, path: str = "direct", *, equilibrate: bool = False) -> tuple[asm.TauSystem, TauSolution]:
    system = asm.assemble(disc, path, equilibrate=equilibrate)
    x, diag = lu_solve(system.matrix, system.rhs)
    sol = extract(x, system)
    return system, with_diagnostics(sol, diag)


def run(
    problem: MfdeProblem,
    n: int,
    d: int,
    path: str = "direct",
    *,
    compare: bool = False,
    equilibrate: bool = False,
) -> Run:
    """Solve ``problem`` with degree-``n`` pieces and degree-``d`` coefficients.

    ``path`` is ``direct``, ``canonical`` or ``auto`` (canonical when the
    discretized coefficients admit it, otherwise direct). A canonical solve is
    always accompanied by a direct solve and a path comparison; ``compare``
    requests the same for a direct solve.
    """
    if path not in PATH_CHOICES:
        raise ValueError(f"path must be one of {PATH_CHOICES}, got {path!r}")
    disc = discretize(problem, n, d, check_leading=False)
    if path == "auto":
        path = "canonical" if _canonical_admissible(disc) else "direct"
    system, sol = solve_discretized(disc, path, equilibrate=equilibrate)
    comparison = None
    if path != "direct" or compare:
        other_path = "direct" if path != "direct" else "canonical"
        try:
            _, other = solve_discretized(disc, other_path, equilibrate=equilibrate)
        except asm.AssemblyError as err:
            log.warning("path comparison skipped: %s", err)
        else:
            direct, canon = (sol, other) if path == "direct" else (other, sol)
            comparison = compare_paths(direct, canon)
    residual = tuple(float(r) for r in perturbed_residual(sol, disc))
    errors = error_report(sol, problem) if problem.exact is not None else None
    return Run(problem, disc, system, sol, residual, errors, comparison)
