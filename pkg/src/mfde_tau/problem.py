"""Boundary-value problems for x'(t) = a(t) x(t) + b(t) x(t-1) + c(t) x(t+1).

The solution is prescribed as ``psi1`` on [-1, 0] and ``psi2`` on (K-1, K]; the
unknown piece lives on (0, K-1]. :func:`discretize` turns a problem into the
per-unit-step polynomial data the assemblers consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from . import expr as ex
from .expr import Expr
from .poly import Poly, compose_affine, interpolate

LEADING_TOL = 1e-12


class ProblemError(ValueError):
    """Invalid problem definition or discretization request."""


@dataclass(frozen=True)
class MfdeProblem:
    a: Expr
    b: Expr
    c: Expr
    psi1: Expr
    psi2: Expr
    K: int
    exact: Optional[Expr] = None
    name: str = "custom"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ProblemError(f"K must be an integer >= 2, got {self.K!r}")

    @classmethod
    def from_strings(cls, a, b, c, psi1, psi2, K, exact=None, name="custom") -> "MfdeProblem":
        return cls(
            ex.as_expr(a), ex.as_expr(b), ex.as_expr(c), ex.as_expr(psi1), ex.as_expr(psi2),
            int(K), None if exact is None else ex.as_expr(exact), name,
        )

    def describe(self) -> dict:
        out = {
            "name": self.name,
            "a": str(self.a),
            "b": str(self.b),
            "c": str(self.c),
            "psi1": str(self.psi1),
            "psi2": str(self.psi2),
            "K": self.K,
        }
        if self.exact is not None:
            out["exact"] = str(self.exact)
        return out


@dataclass(frozen=True)
class DiscretizedProblem:
    """Per-step data on s in [0, 1].

    ``a[k]``, ``b[k]``, ``c[k]`` hold ``d + 1`` coefficients each (zero padded).
    ``left`` and ``right`` are the ``n + 1`` coefficients of the boundary pieces
    X_{-1}(s) = psi1(s - 1) and X_{K-1}(s) = psi2(s + K - 1).
    """

    K: int
    n: int
    d: int
    a: tuple[Poly, ...]
    b: tuple[Poly, ...]
    c: tuple[Poly, ...]
    left: Poly
    right: Poly

    @property
    def steps(self) -> int:
        return self.K - 1

    @property
    def autonomous(self) -> bool:
        return self.d == 0

    def leading_ok(self, tol: float = LEADING_TOL) -> bool:
        return self.d == 0 or all(abs(ak[self.d]) > tol for ak in self.a)


# ---------------------------------------------------------------- polynomial detection


def as_polynomial(e: Expr) -> Optional[Poly]:
    """Exact power-basis form of ``e`` in ``t`` if it is a polynomial, else ``None``."""
    if isinstance(e, ex.Var):
        return Poly([0.0, 1.0])
    if ex.is_constant(e):
        try:
            return Poly([ex.evaluate(e, 0.0)])
        except ex.EvalDomainError:
            return None
    if isinstance(e, ex.Neg):
        p = as_polynomial(e.arg)
        return None if p is None else -p
    if isinstance(e, ex.Call):
        return None
    left, right = as_polynomial(e.left), as_polynomial(e.right)
    if e.op in ("+", "-", "*"):
        if left is None or right is None:
            return None
        return {"+": left + right, "-": left - right, "*": left * right}[e.op].trimmed()
    if e.op == "/":
        if left is None or not ex.is_constant(e.right):
            return None
        den = ex.evaluate(e.right, 0.0)
        return None if den == 0 else left * (1.0 / den)
    if e.op == "^":
        if left is None or not ex.is_constant(e.right):
            return None
        k = ex.evaluate(e.right, 0.0)
        if k < 0 or not float(k).is_integer() or k > 64:
            return None
        acc = Poly([1.0])
        for _ in range(int(k)):
            acc = acc * left
        return acc.trimmed()
    return None


# ----------------------------------------------------------------------- constructors


def family_from_F(F, K: int, name: str = "family") -> MfdeProblem:
    """Problem with known solution ``exp(F(t))``.

    Taking ``a = F'``, ``b(t) = -exp(F(t+1))`` and ``c(t) = exp(F(t-1))`` makes
    ``x = exp(F)`` an exact solution; the boundary data are that solution.
    """
    F = ex.as_expr(F)
    try:
        a = ex.differentiate(F)
    except ex.DifferentiationError as err:
        raise ProblemError(f"cannot build family from F={F}: {err}") from err
    b = ex.neg(ex.call("exp", ex.shift(F, 1.0)))
    c = ex.call("exp", ex.shift(F, -1.0))
    x = ex.call("exp", F)
    return MfdeProblem(a, b, c, x, x, int(K), x, name)


def _exp1(K, m):
    m = float(m)
    return MfdeProblem.from_strings(
        a=repr(m),
        b=f"-exp({m!r}*(t + 1))",
        c=f"exp({m!r}*(t - 1))",
        psi1=f"exp({m!r}*t)",
        psi2=f"exp({m!r}*t)",
        exact=f"exp({m!r}*t)",
        K=K,
        name="exp1",
    )


def _exp2(K):
    x = "t^3 - t^2 + t + 5"
    return MfdeProblem.from_strings(
        a="(3*t^2 - 2*t + 1)/(t^3 - t^2 + t + 5)",
        b="-t^3 - 2*t^2 - 2*t - 6",
        c="t^3 - 4*t^2 + 6*t + 2",
        psi1=x, psi2=x, exact=x, K=K, name="exp2",
    )


def _exp3(K):
    x = "sin(t) + exp(-t) + 2"
    return MfdeProblem.from_strings(
        a="(cos(t) - exp(-t))/(sin(t) + exp(-t) + 2)",
        b="-sin(t + 1) - exp(-t - 1) - 2",
        c="sin(t - 1) + exp(-t + 1) + 2",
        psi1=x, psi2=x, exact=x, K=K, name="exp3",
    )


def _exp4(K):
    x = "exp(1/sqrt(t + 2))"
    return MfdeProblem.from_strings(
        a="-0.5*(t + 2)^(-3/2)",
        b="-exp(1/sqrt(t + 3))",
        c="exp(1/sqrt(t + 1))",
        psi1=x, psi2=x, exact=x, K=K, name="exp4",
    )


def exp5_signal(Vp=1.0, fp=3 / (10 * math.pi), m=0.5, fm=1 / (20 * math.pi)) -> Expr:
    """The amplitude-modulated signal whose logarithm generates experiment 5."""
    Vp, fp, m, fm = map(float, (Vp, fp, m, fm))
    w_p = 2 * math.pi * fp
    w_lo = 2 * math.pi * (fp - fm)
    w_hi = 2 * math.pi * (fp + fm)
    half = m * Vp / 2
    return ex.parse(
        f"{Vp!r}*sin({w_p!r}*t) + {half!r}*cos({w_lo!r}*t) - {half!r}*cos({w_hi!r}*t) + pi"
    )


def _exp5(K, **signal):
    V = exp5_signal(**signal)
    dV = ex.differentiate(V)
    return MfdeProblem(
        a=ex.div(dV, V),
        b=ex.neg(ex.shift(V, 1.0)),
        c=ex.shift(V, -1.0),
        psi1=V, psi2=V, K=int(K), exact=V, name="exp5",
    )


CATALOG = ("exp1", "exp2", "exp3", "exp4", "exp5")
_EXP5_PARAMS = ("Vp", "fp", "m", "fm")


def catalog(name: str, params: Mapping[str, Any]) -> MfdeProblem:
    """One of the five reference experiments.

    ``params`` must supply ``K``; ``exp1`` also needs ``m``. ``exp5`` accepts
    optional ``Vp``, ``fp``, ``m``, ``fm`` (defaults reproduce the reference signal).
    """
    if name not in CATALOG:
        raise ProblemError(f"unknown catalog problem {name!r}; choose from {', '.join(CATALOG)}")
    if params.get("K") is None:
        raise ProblemError(f"{name}: missing parameter 'K'")
    K = int(params["K"])
    if name == "exp1":
        if params.get("m") is None:
            raise ProblemError("exp1: missing parameter 'm'")
        return _exp1(K, params["m"])
    if name == "exp5":
        signal = {k: params[k] for k in _EXP5_PARAMS if params.get(k) is not None}
        return _exp5(K, **signal)
    return {"exp2": _exp2, "exp3": _exp3, "exp4": _exp4}[name](K)


def from_config(cfg: Mapping[str, Any], K: Optional[int] = None, m: Optional[float] = None) -> MfdeProblem:
    """Build a problem from the JSON config schema.

    Accepted shapes: explicit ``{"a","b","c","psi1","psi2"[,"exact"],"K"}``,
    ``{"family_F", "K"}`` or ``{"catalog", "params"}``. ``K``/``m`` given here
    override the file.
    """
    if "catalog" in cfg:
        params = dict(cfg.get("params") or {})
        if K is not None:
            params["K"] = K
        if m is not None:
            params["m"] = m
        return catalog(cfg["catalog"], params)
    K = K if K is not None else cfg.get("K")
    if K is None:
        raise ProblemError("config: missing 'K'")
    if "family_F" in cfg:
        return family_from_F(cfg["family_F"], K, name=cfg.get("name", "family"))
    missing = [k for k in ("a", "b", "c", "psi1", "psi2") if k not in cfg]
    if missing:
        raise ProblemError(f"config: missing field(s) {', '.join(missing)}")
    return MfdeProblem.from_strings(
        cfg["a"], cfg["b"], cfg["c"], cfg["psi1"], cfg["psi2"], K,
        cfg.get("exact"), cfg.get("name", "custom"),
    )


def load_config(path, K=None, m=None) -> MfdeProblem:
    with open(Path(path), encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ProblemError("config: top-level JSON value must be an object")
    return from_config(cfg, K=K, m=m)


# ----------------------------------------------------------------------- discretize


def _piece(e: Expr, offset: float, degree: int) -> Poly:
    """``e(s + offset)`` on s in [0, 1] as ``degree + 1`` coefficients."""
    p = as_polynomial(e)
    if p is not None and p.degree() <= degree:
        return compose_affine(p.trimmed(), 1.0, offset).padded(degree + 1)
    return interpolate(lambda s: ex.evaluate(e, s + offset), degree)


def discretize(p: MfdeProblem, n: int, d: int, *, check_leading: bool = True) -> DiscretizedProblem:
    """Rebase the coefficients to each unit step and approximate them by degree-``d`` polynomials.

    With ``check_leading`` every ``a_k`` must have a non-negligible degree-``d``
    coefficient, which the canonical-polynomial recursion divides by. The direct
    assembler does not need it and passes ``check_leading=False``.
    """
    if n < 1:
        raise ProblemError(f"n must be >= 1, got {n}")
    if not 0 <= d <= n:
        raise ProblemError(f"d must satisfy 0 <= d <= n, got d={d}, n={n}")
    K = p.K
    a = tuple(_piece(p.a, k, d) for k in range(K - 1))
    b = tuple(_piece(p.b, k, d) for k in range(K - 1))
    c = tuple(_piece(p.c, k, d) for k in range(K - 1))
    left = _piece(p.psi1, -1.0, n)
    right = _piece(p.psi2, K - 1.0, n)
    disc = DiscretizedProblem(K, n, d, a, b, c, left, right)
    if check_leading and d >= 1:
        for k, ak in enumerate(a):
            if not abs(ak[d]) > LEADING_TOL:
                raise ProblemError(
                    f"step {k}: degree-{d} coefficient of a_k is {ak[d]:.3e} (|.| <= {LEADING_TOL:g}); "
                    "lower d, use d=0, or use the direct assembly"
                )
    return disc


def exact_residual(p: MfdeProblem, t) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise x' - a x - b x(t-1) - c x(t+1) for the problem's exact solution.

    Returns ``(residual, scale)`` where scale is the largest magnitude among the terms.
    """
    if p.exact is None:
        raise ProblemError("problem has no exact solution")
    t = np.asarray(t, dtype=float)
    x = p.exact
    dx = ex.evaluate(ex.differentiate(x), t)
    terms = np.stack([
        dx,
        ex.evaluate(p.a, t) * ex.evaluate(x, t),
        ex.evaluate(p.b, t) * ex.evaluate(x, t - 1),
        ex.evaluate(p.c, t) * ex.evaluate(x, t + 1),
    ])
    res = terms[0] - terms[1] - terms[2] - terms[3]
    return res, np.abs(terms).max(axis=0)
