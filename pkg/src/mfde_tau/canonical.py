"""Canonical polynomials of the step operator D[x] = x' - a_k(s) x.

For ``a_k`` of degree ``d_a >= 1`` the indices ``0 .. d_a-1`` have no canonical
polynomial; the table holds ``Q_{d_a+m}`` for ``m = 0 .. n``, each of degree
``m``, built by the two-branch recursion that only touches defined indices.

Two residuals are kept per entry. ``formula_residuals`` is the closed form that
accounts only for the directly dropped undefined terms; :func:`applied_residual`
applies the operator to the computed polynomial. They differ once dropped terms
propagate through the recursion, and nothing here assumes they agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poly import Poly, differentiate, mul


class CanonicalError(ValueError):
    pass


def apply_operator(a_k: Poly, x: Poly) -> Poly:
    """D[x] = x' - a_k x."""
    return differentiate(x) - mul(a_k, x)


def generating_polynomial(a_k: Poly, m: int) -> Poly:
    """D[s^m] = m s^(m-1) - sum_i alpha_i s^(m+i), degree m + d_a."""
    alpha = a_k.trimmed().coeffs
    out = np.zeros(m + alpha.size)
    if m >= 1:
        out[m - 1] = m
    out[m:] -= alpha
    return Poly(out)


@dataclass(frozen=True)
class CanonicalTable:
    k: int
    d_a: int
    n: int
    entries: tuple[Poly, ...]
    formula_residuals: tuple[Poly, ...]

    def q(self, j: int, m: int) -> float:
        """Coefficient of s^j in Q_{d_a+m}; zero outside ``0 <= j <= m``."""
        if m < 0 or m > self.n:
            return 0.0
        return self.entries[m][j]

    def matrix(self) -> np.ndarray:
        """``Q[j, m] = q_j^(m)``, upper triangular of order n + 1."""
        Q = np.zeros((self.n + 1, self.n + 1))
        for m, e in enumerate(self.entries):
            Q[: m + 1, m] = e.coeffs[: m + 1]
        return Q


def build_table(a_k: Poly, n: int, k: int = 0) -> CanonicalTable:
    a = a_k.trimmed()
    d = a.degree()
    if d == -math.inf or d < 1:
        raise CanonicalError(
            f"step {k}: canonical recursion needs deg a_k >= 1 with nonzero leading coefficient"
        )
    alpha = a.coeffs
    lead = alpha[d]
    entries: list[Poly] = []
    residuals: list[Poly] = []
    for m in range(n + 1):
        acc = Poly.monomial(m)
        if m <= d:
            for i in range(m):
                acc = acc + entries[i] * alpha[d - m + i]
        else:
            acc = acc - entries[m - 1 - d] * m
            for i in range(1, d + 1):
                acc = acc + entries[m - i] * alpha[d - i]
        entries.append(Poly((acc * (-1.0 / lead)).coeffs[: m + 1]))

        if m <= d:
            r = np.zeros(d)
            if m >= 1:
                r[m - 1] -= m
            for i in range(d - m):
                r[m + i] += alpha[i]
            residuals.append(Poly(r / lead))
        else:
            residuals.append(Poly([0.0]))
    return CanonicalTable(k, d, n, tuple(entries), tuple(residuals))


def applied_residual(table: CanonicalTable, a_k: Poly, m: int) -> Poly:
    """D[Q_{d_a+m}] - s^(d_a+m), computed by applying the operator."""
    target = Poly.monomial(table.d_a + m)
    return (apply_operator(a_k, table.entries[m]) - target).trimmed()


def autonomous_q(a: float, m: int) -> Poly:
    """Q_m for the constant-coefficient operator x' - a x: coefficients -m!/(i! a^(m-i+1))."""
    if a == 0:
        raise CanonicalError("autonomous canonical polynomials need a != 0")
    return Poly([-math.factorial(m) / (math.factorial(i) * a ** (m - i + 1)) for i in range(m + 1)])


def autonomous_table(a: float, n: int, k: int = 0) -> CanonicalTable:
    entries = tuple(autonomous_q(a, m) for m in range(n + 1))
    zeros = tuple(Poly([0.0]) for _ in range(n + 1))
    return CanonicalTable(k, 0, n, entries, zeros)
