"""Square linear systems for the segmented Tau method.

Unknowns are ordered as all solution coefficient blocks ``a^(0) .. a^(K-2)``
(``n + 1`` each) followed by the tau blocks (``d + 2`` for step 0, ``d + 1`` for
every later step). Each step k solves

    X_k' - a_k X_k = b_k X_{k-1} + c_k X_{k+1} + H_k,
    H_0 = (tau^(0) poly of degree d+1) T*_{n-1},   H_k = (degree d) T*_n,

with X_{-1}, X_{K-1} the boundary pieces, plus K continuity links
X_k(0) = X_{k-1}(1) for k = 0 .. K-1.

Two assemblies of that same perturbed problem are provided:

* :func:`assemble_direct` equates the ``n + d + 1`` power coefficients of each
  step equation directly. This is the default and is exact by construction.
* :func:`assemble_canonical` writes X_k as a combination of the step's canonical
  polynomials, which yields the block matrix of identity / upper-triangular
  blocks plus ``d`` zero-coefficient rows per step for the undefined indices.
  :func:`assemble_autonomous` is its ``d = 0`` form with the closed-form Q_m.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .canonical import CanonicalTable, autonomous_table, build_table
from .poly import Poly, chebyshev_shifted
from .problem import LEADING_TOL, DiscretizedProblem

PATHS = ("direct", "canonical", "autonomous")


class AssemblyError(ValueError):
    pass


def system_order(K: int, n: int, d: int) -> int:
    return (n + d + 1) * (K - 1) + K


@dataclass(frozen=True)
class UnknownIndex:
    """Position of every a_i^(k) and tau_i^(k) in the unknown vector."""

    K: int
    n: int
    d: int

    @property
    def steps(self) -> int:
        return self.K - 1

    @property
    def size(self) -> int:
        return system_order(self.K, self.n, self.d)

    def coef(self, k: int, i: int = 0) -> int:
        return k * (self.n + 1) + i

    def coef_slice(self, k: int) -> slice:
        start = self.coef(k)
        return slice(start, start + self.n + 1)

    def tau_count(self, k: int) -> int:
        return self.d + 2 if k == 0 else self.d + 1

    def tau(self, k: int, i: int = 0) -> int:
        base = self.steps * (self.n + 1)
        if k == 0:
            return base + i
        return base + self.d + 2 + (k - 1) * (self.d + 1) + i

    def tau_slice(self, k: int) -> slice:
        start = self.tau(k)
        return slice(start, start + self.tau_count(k))

    def labels(self) -> list[str]:
        out = [f"a[{k}][{i}]" for k in range(self.steps) for i in range(self.n + 1)]
        out += [f"tau[{k}][{i}]" for k in range(self.steps) for i in range(self.tau_count(k))]
        return out


@dataclass(frozen=True)
class PerturbationSpec:
    """Shape of the perturbation term H_k = (tau polynomial) * T*."""

    K: int
    n: int
    d: int

    def tau_degree(self, k: int) -> int:
        return self.d + 1 if k == 0 else self.d

    def chebyshev_degree(self, k: int) -> int:
        return self.n - 1 if k == 0 else self.n

    def chebyshev(self, k: int) -> Poly:
        return _cheb(self.chebyshev_degree(k))

    @property
    def h_degree(self) -> int:
        return self.n + self.d

    def term(self, k: int, taus: Sequence[float]) -> Poly:
        return Poly(np.asarray(taus, dtype=float)) * self.chebyshev(k)


_CHEB_CACHE: dict[int, Poly] = {}


def _cheb(n: int) -> Poly:
    if n not in _CHEB_CACHE:
        _CHEB_CACHE[n] = chebyshev_shifted(n)
    return _CHEB_CACHE[n]


@dataclass(frozen=True, eq=False)
class TauSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    index: UnknownIndex
    perturbation: PerturbationSpec
    path: str
    row_scale: Optional[np.ndarray] = None

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def layout(self) -> dict[str, int]:
        """Row offsets of the equation groups."""
        K, n, d = self.index.K, self.index.n, self.index.d
        if self.path == "direct":
            return {"steps": 0, "continuity": (K - 1) * (n + d + 1)}
        return {"coefficients": 0, "zero": (K - 1) * (n + 1), "continuity": (K - 1) * (n + 1 + d)}


def _product(coeffs: np.ndarray, ncols: int, nrows: int) -> np.ndarray:
    """Matrix of ``v -> coeffs * v`` (polynomial product), truncated to ``nrows`` powers."""
    M = np.zeros((nrows, ncols))
    L = coeffs.size
    for j in range(ncols):
        hi = min(nrows, j + L)
        if hi > j:
            M[j:hi, j] = coeffs[: hi - j]
    return M


def _forcing(disc: DiscretizedProblem, idx: UnknownIndex, spec: PerturbationSpec, k: int):
    """Coefficients of b_k X_{k-1} + c_k X_{k+1} + H_k as ``G @ x + r0`` (powers 0..n+d)."""
    n, d = disc.n, disc.d
    nr = n + d + 1
    G = np.zeros((nr, idx.size))
    r0 = np.zeros(nr)
    Bm = _product(disc.b[k].coeffs, n + 1, nr)
    Cm = _product(disc.c[k].coeffs, n + 1, nr)
    if k == 0:
        r0 += Bm @ disc.left.padded(n + 1).coeffs
    else:
        G[:, idx.coef_slice(k - 1)] += Bm
    if k == disc.K - 2:
        r0 += Cm @ disc.right.padded(n + 1).coeffs
    else:
        G[:, idx.coef_slice(k + 1)] += Cm
    G[:, idx.tau_slice(k)] += _product(spec.chebyshev(k).coeffs, idx.tau_count(k), nr)
    return G, r0


def _continuity(disc: DiscretizedProblem, idx: UnknownIndex):
    K, n = disc.K, disc.n
    A = np.zeros((K, idx.size))
    b = np.zeros(K)
    A[0, idx.coef(0)] = 1.0
    b[0] = disc.left.coeffs.sum()
    for k in range(1, K - 1):
        A[k, idx.coef_slice(k - 1)] = 1.0
        A[k, idx.coef(k)] = -1.0
    A[K - 1, idx.coef_slice(K - 2)] = 1.0
    b[K - 1] = disc.right[0]
    return A, b


def _equilibrate(A: np.ndarray, b: np.ndarray):
    s = np.abs(A).max(axis=1)
    s[s == 0] = 1.0
    s = 1.0 / s
    return A * s[:, None], b * s, s


def _finish(A, b, idx, spec, path, equilibrate):
    if A.shape != (idx.size, idx.size):
        raise AssemblyError(f"assembled {A.shape} system, expected order {idx.size}")
    scale = None
    if equilibrate:
        A, b, scale = _equilibrate(A, b)
    A.flags.writeable = False
    b.flags.writeable = False
    return TauSystem(A, b, idx, spec, path, scale)


def assemble_direct(disc: DiscretizedProblem, *, equilibrate: bool = False) -> TauSystem:
    """Equate power coefficients of X_k' - a_k X_k - b_k X_{k-1} - c_k X_{k+1} - H_k.

    Rows: step 0 powers 0..n+d, step 1, ..., then the K continuity rows.
    Works for any ``0 <= d <= n`` and places no condition on a_k.
    """
    K, n, d = disc.K, disc.n, disc.d
    idx = UnknownIndex(K, n, d)
    spec = PerturbationSpec(K, n, d)
    nr = n + d + 1
    N = idx.size
    A = np.zeros((N, N))
    b = np.zeros(N)
    Dm = np.zeros((nr, n + 1))
    for p in range(n):
        Dm[p, p + 1] = p + 1
    for k in range(K - 1):
        rows = slice(k * nr, (k + 1) * nr)
        G, r0 = _forcing(disc, idx, spec, k)
        A[rows] = -G
        A[rows, idx.coef_slice(k)] += Dm - _product(disc.a[k].coeffs, n + 1, nr)
        b[rows] = r0
    Ac, bc = _continuity(disc, idx)
    A[(K - 1) * nr :] = Ac
    b[(K - 1) * nr :] = bc
    return _finish(A, b, idx, spec, "direct", equilibrate)


def _assemble_from_tables(disc, tables: Sequence[CanonicalTable], path: str, equilibrate: bool):
    K, n, d = disc.K, disc.n, disc.d
    idx = UnknownIndex(K, n, d)
    spec = PerturbationSpec(K, n, d)
    N = idx.size
    A = np.zeros((N, N))
    b = np.zeros(N)
    zero0 = (K - 1) * (n + 1)
    for k in range(K - 1):
        Q = tables[k].matrix()
        G, r0 = _forcing(disc, idx, spec, k)
        # X_k = sum_m r_{d+m} Q_{d+m}  ->  a^(k) - Q G[d:] x = Q r0[d:]
        rows = slice(k * (n + 1), (k + 1) * (n + 1))
        A[rows] = -Q @ G[d:]
        A[rows, idx.coef_slice(k)] += np.eye(n + 1)
        b[rows] = Q @ r0[d:]
        # coefficients of the undefined Q_0 .. Q_{d-1} must vanish
        zrows = slice(zero0 + k * d, zero0 + (k + 1) * d)
        A[zrows] = G[:d]
        b[zrows] = -r0[:d]
    Ac, bc = _continuity(disc, idx)
    A[(K - 1) * (n + 1 + d) :] = Ac
    b[(K - 1) * (n + 1 + d) :] = bc
    return _finish(A, b, idx, spec, path, equilibrate)


def canonical_tables(disc: DiscretizedProblem) -> list[CanonicalTable]:
    if disc.d == 0:
        return [autonomous_table(_autonomous_a(disc, k), disc.n, k) for k in range(disc.K - 1)]
    tables = []
    for k, ak in enumerate(disc.a):
        if not abs(ak[disc.d]) > LEADING_TOL:
            raise AssemblyError(
                f"step {k}: leading coefficient of a_k is {ak[disc.d]:.3e}; canonical assembly needs d = d_a"
            )
        tables.append(build_table(ak.padded(disc.d + 1), disc.n, k))
        if tables[-1].d_a != disc.d:
            raise AssemblyError(f"step {k}: a_k has effective degree {tables[-1].d_a} < d={disc.d}")
    return tables


def _autonomous_a(disc: DiscretizedProblem, k: int) -> float:
    a = disc.a[k][0]
    if a == 0:
        raise AssemblyError(f"step {k}: autonomous canonical assembly needs a != 0 (use the direct path)")
    return a


def assemble_canonical(
    disc: DiscretizedProblem,
    tables: Optional[Sequence[CanonicalTable]] = None,
    *,
    equilibrate: bool = False,
) -> TauSystem:
    """Canonical-polynomial block assembly (requires d >= 1 and deg a_k = d for all k).

    Row layout: K-1 blocks of n+1 coefficient equations, K-1 blocks of d
    zero-coefficient equations, K continuity equations.
    """
    if disc.d < 1:
        raise AssemblyError("canonical assembly needs d >= 1; use assemble_autonomous for d = 0")
    if tables is None:
        tables = canonical_tables(disc)
    if len(tables) != disc.K - 1:
        raise AssemblyError(f"need {disc.K - 1} canonical tables, got {len(tables)}")
    for k, tab in enumerate(tables):
        if tab.n < disc.n or tab.d_a != disc.d:
            raise AssemblyError(f"step {k}: canonical table does not match (d_a={tab.d_a}, n={tab.n})")
    return _assemble_from_tables(disc, tables, "canonical", equilibrate)


def assemble_autonomous(disc: DiscretizedProblem, *, equilibrate: bool = False) -> TauSystem:
    """Constant-coefficient (d = 0) assembly using the closed-form canonical polynomials."""
    if disc.d != 0:
        raise AssemblyError(f"autonomous assembly needs d = 0, got d={disc.d}")
    return _assemble_from_tables(disc, canonical_tables(disc), "autonomous", equilibrate)


def assemble(disc: DiscretizedProblem, path: str = "direct", *, equilibrate: bool = False) -> TauSystem:
    """``path`` is ``direct`` or ``canonical`` (the latter picks the autonomous form when d = 0)."""
    if path == "direct":
        return assemble_direct(disc, equilibrate=equilibrate)
    if path in ("canonical", "autonomous"):
        if disc.d == 0:
            return assemble_autonomous(disc, equilibrate=equilibrate)
        return assemble_canonical(disc, equilibrate=equilibrate)
    raise AssemblyError(f"unknown assembly path {path!r}")


def canonical_blocks(system: TauSystem) -> dict:
    """Slice a canonical/autonomous system into its named blocks.

    Keys follow the block matrix: ``I``, ``U_gamma[k]``, ``U_beta[k]``,
    ``R_tilde_C``, ``R_C_step[k]``, ``R_gamma[k]``, ``R_beta[k]``, ``R_hat_C``,
    ``R_C[k]``, ``M[i]`` (i = 1 .. K-1) and rhs pieces ``u_left``, ``u_right``,
    ``v_left``, ``v_right``, ``w``.
    """
    if system.path == "direct":
        raise AssemblyError("block view is defined for the canonical layout only")
    A, rhs = system.matrix, system.rhs
    if system.row_scale is not None:
        A = A / system.row_scale[:, None]
        rhs = rhs / system.row_scale
    idx = system.index
    K, n, d = idx.K, idx.n, idx.d
    lay = system.layout
    crow = lambda k: slice(k * (n + 1), (k + 1) * (n + 1))  # noqa: E731
    zrow = lambda k: slice(lay["zero"] + k * d, lay["zero"] + (k + 1) * d)  # noqa: E731
    out: dict = {
        "I": [A[crow(k), idx.coef_slice(k)] for k in range(K - 1)],
        "U_gamma": {k: A[crow(k), idx.coef_slice(k + 1)] for k in range(K - 2)},
        "U_beta": {k: A[crow(k), idx.coef_slice(k - 1)] for k in range(1, K - 1)},
        "R_tilde_C": A[crow(0), idx.tau_slice(0)],
        "R_C_step": {k: A[crow(k), idx.tau_slice(k)] for k in range(1, K - 1)},
        "R_gamma": {k: A[zrow(k), idx.coef_slice(k + 1)] for k in range(K - 2)},
        "R_beta": {k: A[zrow(k), idx.coef_slice(k - 1)] for k in range(1, K - 1)},
        "R_hat_C": A[zrow(0), idx.tau_slice(0)],
        "R_C": {k: A[zrow(k), idx.tau_slice(k)] for k in range(1, K - 1)},
        "M": {i: A[lay["continuity"] :, idx.coef_slice(i - 1)] for i in range(1, K)},
        "u_left": rhs[crow(0)],
        "u_right": rhs[crow(K - 2)],
        "v_left": rhs[zrow(0)],
        "v_right": rhs[zrow(K - 2)],
        "w": rhs[lay["continuity"] :],
    }
    return out


def dump_csv(system: TauSystem, path) -> None:
    """Write ``A | b`` with one row per equation, preceded by an unknown-label header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(system.index.labels() + ["rhs"])
        for row, val in zip(system.matrix, system.rhs):
            w.writerow([repr(float(v)) for v in row] + [repr(float(val))])
