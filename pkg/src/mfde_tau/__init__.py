"""Segmented Tau solver for x'(t) = a(t)x(t) + b(t)x(t-1) + c(t)x(t+1) boundary-value problems."""

from .expr import parse
from .pipeline import Run, run
from .problem import MfdeProblem, catalog, discretize, family_from_F

__all__ = ["MfdeProblem", "Run", "catalog", "discretize", "family_from_F", "parse", "run"]
__version__ = "0.1.0"
