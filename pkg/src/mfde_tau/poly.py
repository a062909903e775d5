"""Dense power-basis polynomials on the reference interval [0, 1]."""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np

CHEBYSHEV_MAX_DEGREE = 60
CHEBYSHEV_EXACT_DEGREE = 25
TRIM_RTOL = 1e-14


_SPLITTER = 2.0**27 + 1.0


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_sum(a, b):
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _two_prod(a, b, b_hi, b_lo):
    p = a * b
    a_hi, a_lo = _split(a)
    return p, a_lo * b_lo - (((p - a_hi * b_hi) - a_lo * b_hi) - a_hi * b_lo)


class Poly:
    """Immutable polynomial ``c[0] + c[1] s + ... + c[N] s^N``.

    The stored coefficient array keeps its length (zero padding is meaningful to
    callers that index coefficients positionally); :meth:`degree` ignores
    negligible trailing entries.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[float] | np.ndarray = (0.0,)):
        c = np.array(coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c.flags.writeable = False
        self.coeffs = c

    @classmethod
    def constant(cls, value: float) -> "Poly":
        return cls([value])

    @classmethod
    def monomial(cls, m: int, value: float = 1.0) -> "Poly":
        c = np.zeros(m + 1)
        c[m] = value
        return cls(c)

    def __len__(self) -> int:
        return self.coeffs.size

    def __getitem__(self, i: int) -> float:
        return float(self.coeffs[i]) if 0 <= i < self.coeffs.size else 0.0

    def __repr__(self) -> str:
        return f"Poly({self.coeffs.tolist()!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        n = max(len(self), len(other))
        return bool(np.array_equal(self.padded(n).coeffs, other.padded(n).coeffs))

    __hash__ = None

    def degree(self) -> float:
        """Index of the last non-negligible coefficient; ``-inf`` for the zero polynomial."""
        mag = np.abs(self.coeffs)
        top = mag.max()
        if top == 0:
            return -math.inf
        nz = np.nonzero(mag > TRIM_RTOL * top)[0]
        return int(nz[-1])

    def trimmed(self) -> "Poly":
        deg = self.degree()
        if deg == -math.inf:
            return Poly([0.0])
        return Poly(self.coeffs[: deg + 1])

    def padded(self, length: int) -> "Poly":
        """Zero-pad (or truncate exact zeros) to exactly ``length`` coefficients."""
        c = self.coeffs
        if c.size > length:
            if np.any(c[length:] != 0):
                raise ValueError(f"cannot fit degree {c.size - 1} polynomial into {length} coefficients")
            return Poly(c[:length])
        out = np.zeros(length)
        out[: c.size] = c
        return Poly(out)

    def eval(self, s):
        """Compensated Horner evaluation at a scalar or array ``s``.

        The rounding errors of each multiply-add are recovered exactly and
        accumulated in a second Horner pass, which keeps values accurate for
        the large alternating coefficients of shifted Chebyshev polynomials.
        """
        s = np.asarray(s, dtype=float)
        acc = np.full_like(s, self.coeffs[-1])
        err = np.zeros_like(s)
        s_hi, s_lo = _split(s)
        for c in self.coeffs[-2::-1]:
            prod, prod_err = _two_prod(acc, s, s_hi, s_lo)
            acc, sum_err = _two_sum(prod, c)
            err = err * s + (prod_err + sum_err)
        out = acc + err
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def __add__(self, other: "Poly") -> "Poly":
        return add(self, other)

    def __sub__(self, other: "Poly") -> "Poly":
        return add(self, scale(other, -1.0))

    def __mul__(self, other) -> "Poly":
        if isinstance(other, Poly):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Poly":
        return scale(self, -1.0)

    def derivative(self) -> "Poly":
        return differentiate(self)


def add(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    return Poly(p.padded(n).coeffs + q.padded(n).coeffs)


def mul(p: Poly, q: Poly) -> Poly:
    return Poly(np.convolve(p.coeffs, q.coeffs))


def scale(p: Poly, factor: float) -> Poly:
    return Poly(p.coeffs * factor)


def differentiate(p: Poly) -> Poly:
    c = p.coeffs
    if c.size == 1:
        return Poly([0.0])
    return Poly(c[1:] * np.arange(1, c.size))


def compose_affine(p: Poly, alpha: float, beta: float) -> Poly:
    """Return ``q`` with ``q(s) = p(alpha*s + beta)``, same coefficient count as ``p``."""
    lin = Poly([beta, alpha])
    acc = Poly([p.coeffs[-1]])
    for c in p.coeffs[-2::-1]:
        acc = mul(acc, lin) + Poly([c])
    return acc


def chebyshev_shifted(n: int) -> Poly:
    """Power-basis coefficients of the shifted Chebyshev polynomial ``T*_n`` on [0, 1].

    Built from ``T*_{k+1} = 2(2s - 1) T*_k - T*_{k-1}`` in integer arithmetic, so the
    result is exact up to the final conversion to float (exact for ``n <= 25``).
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n > CHEBYSHEV_MAX_DEGREE:
        raise ValueError(f"shifted Chebyshev degree {n} exceeds cap {CHEBYSHEV_MAX_DEGREE}")
    if n > CHEBYSHEV_EXACT_DEGREE:
        warnings.warn(
            f"T*_{n} coefficients exceed the exactly representable float range",
            RuntimeWarning,
            stacklevel=2,
        )
    prev, cur = [1], [-1, 2]
    if n == 0:
        return Poly(prev)
    for _ in range(n - 1):
        nxt = [0] * (len(cur) + 1)
        for i, c in enumerate(cur):
            nxt[i] -= 2 * c
            nxt[i + 1] += 4 * c
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return Poly([float(c) for c in cur])


def chebyshev_gauss_nodes(d: int) -> np.ndarray:
    """The ``d + 1`` Chebyshev-Gauss nodes mapped into (0, 1)."""
    i = np.arange(d + 1)
    return (1.0 + np.cos((2 * i + 1) * np.pi / (2 * d + 2))) / 2.0


def interpolate(f: Callable[[np.ndarray], np.ndarray], d: int) -> Poly:
    """Degree-``d`` interpolant of ``f`` at the Chebyshev-Gauss nodes of [0, 1].

    ``f`` receives the node array and must return matching values. The
    interpolant is formed in Newton form and expanded into the power basis.
    """
    if d < 0:
        raise ValueError("degree must be non-negative")
    x = chebyshev_gauss_nodes(d)
    y = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()
    # divided differences, in place
    for j in range(1, d + 1):
        y[j:] = (y[j:] - y[j - 1 : -1]) / (x[j:] - x[: d + 1 - j])
    acc = Poly([y[d]])
    for i in range(d - 1, -1, -1):
        acc = mul(acc, Poly([-x[i], 1.0])) + Poly([y[i]])
    return acc.padded(d + 1)
