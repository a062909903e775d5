import csv
import dataclasses

import numpy as np
import pytest

from conftest import random_poly_problem
from mfde_tau import assemble as asm
from mfde_tau.linalg import lu_solve
from mfde_tau.poly import Poly, chebyshev_shifted
from mfde_tau.problem import MfdeProblem, catalog, discretize
from mfde_tau.solution import extract, perturbed_residual, step_residual


def poly_disc(seed, K, n, d):
    rng = np.random.default_rng(seed)
    return discretize(random_poly_problem(rng, K, d, n), n, d)


# ----------------------------------------------------------------- reference formulas
# Entries written with 1-based (i, j) exactly as the block definitions read.


def cheb(deg):
    C = chebyshev_shifted(deg).coeffs
    return lambda i: C[i] if 0 <= i < C.size else 0.0


def ref_U(coef, tab, n, d):
    """-sum_l coef_{d-l} q_{i-1}^{(j-1-l)} with l <= d for i <= j-d-1 and l <= j-i otherwise."""
    U = np.zeros((n + 1, n + 1))
    for j in range(1, n + 2):
        for i in range(1, j + 1):
            top = d if i <= j - d - 1 else j - i
            U[i - 1, j - 1] = -sum(coef[d - l] * tab.q(i - 1, j - 1 - l) for l in range(top + 1))
    return U


def ref_R_tilde(tab, n, d):
    C = cheb(n - 1)
    R = np.zeros((n + 1, d + 2))
    if d == n:
        for j in range(2, n + 3):
            for i in range(1, min(j - 1, n + 1) + 1):
                R[i - 1, j - 1] = -sum(C(n - l) * tab.q(i - 1, j - 1 - l) for l in range(1, j - i + 1))
    elif d == n - 1:
        for j in range(1, d + 3):
            for i in range(1, j + 1):
                R[i - 1, j - 1] = -sum(C(n - 1 - l) * tab.q(i - 1, j - 1 - l) for l in range(j - i + 1))
    else:
        for j in range(1, d + 3):
            for i in range(1, min(n - d + j - 1, n + 1) + 1):
                R[i - 1, j - 1] = -sum(
                    C(n - 1 - l) * tab.q(i - 1, n - d + j - 2 - l) for l in range(n - d + j - i)
                )
    return R


def ref_R_C_step(tab, n, d):
    C = cheb(n)
    R = np.zeros((n + 1, d + 1))
    for j in range(1, d + 2):
        for i in range(1, min(n - d + j, n + 1) + 1):
            R[i - 1, j - 1] = -sum(C(n - l) * tab.q(i - 1, n - d + j - 1 - l) for l in range(n - d + j - i + 1))
    return R


def ref_u(coef, bnd, tab, n, d):
    """u_i = sum_j (coefficient of s^(d+j) of coef * boundary piece) q_{i-1}^{(j)}."""
    def piece(j):
        if j <= n - d:
            return sum(coef[l] * bnd[d + j - l] for l in range(d + 1))
        return sum(coef[n - l] * bnd[j + d - n + l] for l in range(n - d, 2 * n - d - j + 1))

    return np.array([sum(piece(j) * tab.q(i - 1, j) for j in range(i - 1, n + 1)) for i in range(1, n + 2)])


def ref_v(coef, bnd, d):
    return np.array([-sum(coef[j] * bnd[i - 1 - j] for j in range(i)) for i in range(1, d + 1)])


def toeplitz_lower(coef, rows, cols):
    return np.array([[coef[i - p] if 0 <= i - p < len(coef) else 0.0 for p in range(cols)] for i in range(rows)])


# ----------------------------------------------------------------- block formulas


@pytest.mark.parametrize("n, d", [(4, 4), (4, 3), (5, 2), (6, 1), (3, 1)])
def test_canonical_blocks_match_entry_formulas(n, d):
    K = 4
    disc = poly_disc(100 + 10 * n + d, K, n, d)
    system = asm.assemble_canonical(disc)
    tables = asm.canonical_tables(disc)
    B = asm.canonical_blocks(system)
    for k in range(K - 1):
        np.testing.assert_array_equal(B["I"][k], np.eye(n + 1))
    for k in range(K - 2):
        gamma = disc.c[k].padded(d + 1).coeffs
        np.testing.assert_allclose(B["U_gamma"][k], ref_U(gamma, tables[k], n, d), rtol=1e-12, atol=1e-12)
    for k in range(1, K - 1):
        beta = disc.b[k].padded(d + 1).coeffs
        np.testing.assert_allclose(B["U_beta"][k], ref_U(beta, tables[k], n, d), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(B["R_C_step"][k], ref_R_C_step(tables[k], n, d), rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(B["R_tilde_C"], ref_R_tilde(tables[0], n, d), rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("n, d", [(4, 4), (5, 2), (3, 1)])
def test_zero_coefficient_rows(n, d):
    """Rows forcing the undefined canonical polynomials out: lower-triangular Toeplitz blocks."""
    K = 4
    disc = poly_disc(200 + n + d, K, n, d)
    B = asm.canonical_blocks(asm.assemble_canonical(disc))
    for k in range(K - 2):
        R = B["R_gamma"][k]
        np.testing.assert_array_equal(R, toeplitz_lower(disc.c[k].coeffs, d, n + 1))
        assert not R[:, d:].any()
    for k in range(1, K - 1):
        np.testing.assert_array_equal(B["R_beta"][k], toeplitz_lower(disc.b[k].coeffs, d, n + 1))
        np.testing.assert_array_equal(B["R_C"][k], toeplitz_lower(chebyshev_shifted(n).coeffs, d, d + 1))
    np.testing.assert_array_equal(B["R_hat_C"], toeplitz_lower(chebyshev_shifted(n - 1).coeffs, d, d + 2))


@pytest.mark.parametrize("n, d", [(4, 4), (5, 2), (3, 1)])
def test_rhs_blocks(n, d):
    K = 4
    disc = poly_disc(300 + n + d, K, n, d)
    tables = asm.canonical_tables(disc)
    B = asm.canonical_blocks(asm.assemble_canonical(disc))
    left, right = disc.left.padded(n + 1).coeffs, disc.right.padded(n + 1).coeffs
    beta0 = disc.b[0].padded(d + 1).coeffs
    gammaL = disc.c[K - 2].padded(d + 1).coeffs
    np.testing.assert_allclose(B["u_left"], ref_u(beta0, left, tables[0], n, d), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(B["u_right"], ref_u(gammaL, right, tables[K - 2], n, d), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(B["v_left"], ref_v(beta0, left, d), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(B["v_right"], ref_v(gammaL, right, d), rtol=1e-14, atol=1e-14)
    assert B["v_left"][0] == pytest.approx(-beta0[0] * left[0])
    w = np.zeros(K)
    w[0], w[-1] = left.sum(), right[0]
    np.testing.assert_allclose(B["w"], w)


def test_continuity_blocks():
    K, n, d = 5, 3, 2
    B = asm.canonical_blocks(asm.assemble_canonical(poly_disc(9, K, n, d)))
    for i in range(1, K):
        M = B["M"][i]
        assert M.shape == (K, n + 1)
        nonzero = [r for r in range(K) if M[r].any()]
        assert nonzero == [i - 1, i]
        expected_first = np.zeros(n + 1)
        expected_first[0] = 1.0 if i == 1 else -1.0  # a_0^(k) enters X_{k-1}(1) - X_k(0) = 0 negated
        np.testing.assert_array_equal(M[i - 1], expected_first)
        np.testing.assert_array_equal(M[i], np.ones(n + 1))


def test_exp1_continuity_rhs():
    disc = discretize(catalog("exp1", {"K": 3, "m": 0.7}), 9, 0)
    w = asm.canonical_blocks(asm.assemble(disc, "canonical"))["w"]
    assert w[0] == pytest.approx(1.0, abs=1e-9)
    assert w[1] == 0.0


def test_block_view_requires_canonical_layout():
    disc = poly_disc(1, 3, 3, 1)
    with pytest.raises(asm.AssemblyError):
        asm.canonical_blocks(asm.assemble_direct(disc))


def test_block_view_undoes_row_scaling():
    disc = poly_disc(2, 4, 4, 2)
    plain = asm.canonical_blocks(asm.assemble_canonical(disc))
    scaled = asm.canonical_blocks(asm.assemble_canonical(disc, equilibrate=True))
    np.testing.assert_allclose(scaled["U_gamma"][0], plain["U_gamma"][0], rtol=1e-13)
    np.testing.assert_allclose(scaled["u_left"], plain["u_left"], rtol=1e-13)


# ----------------------------------------------------------------- structure


def test_order_formula_examples():
    assert asm.system_order(3, 3, 3) == 17
    idx = asm.UnknownIndex(3, 3, 3)
    assert 2 * 4 + idx.tau_count(0) + idx.tau_count(1) == 17
    assert asm.system_order(3, 9, 0) == 23
    assert asm.system_order(101, 7, 6) == 1501


def test_index_map_is_a_bijection():
    for K in range(2, 11):
        for n in range(1, 13):
            for d in range(1, n + 1):
                idx = asm.UnknownIndex(K, n, d)
                pos = [idx.coef(k, i) for k in range(K - 1) for i in range(n + 1)]
                pos += [idx.tau(k, i) for k in range(K - 1) for i in range(idx.tau_count(k))]
                assert sorted(pos) == list(range(asm.system_order(K, n, d)))
                assert len(set(idx.labels())) == idx.size


@pytest.mark.parametrize("K, n, d", [(2, 1, 1), (2, 5, 5), (3, 4, 1), (6, 6, 3), (10, 12, 12), (10, 3, 0)])
def test_systems_are_square(K, n, d):
    disc = poly_disc(K + n + d, K, n, d)
    for path in ("direct", "canonical"):
        system = asm.assemble(disc, path)
        assert system.matrix.shape == (system.index.size, system.index.size)
        assert system.order == asm.system_order(K, n, d)
        assert not system.matrix.flags.writeable


def test_perturbation_spec():
    spec = asm.PerturbationSpec(4, 5, 2)
    assert (spec.tau_degree(0), spec.chebyshev_degree(0)) == (3, 4)
    assert (spec.tau_degree(2), spec.chebyshev_degree(2)) == (2, 5)
    assert spec.h_degree == 7
    for k in range(3):
        taus = np.ones(spec.tau_degree(k) + 1)
        assert spec.term(k, taus).degree() == spec.h_degree


def test_padding_of_short_coefficients_is_bitwise_neutral():
    disc = poly_disc(5, 4, 5, 3)
    short = dataclasses.replace(
        disc,
        b=tuple(Poly(p.coeffs[:2]) for p in disc.b),
        c=tuple(Poly(p.coeffs[:1]) for p in disc.c),
    )
    padded = dataclasses.replace(
        short,
        b=tuple(p.padded(4) for p in short.b),
        c=tuple(p.padded(4) for p in short.c),
    )
    for path in ("direct", "canonical"):
        s1, s2 = asm.assemble(short, path), asm.assemble(padded, path)
        assert np.array_equal(s1.matrix, s2.matrix)
        assert np.array_equal(s1.rhs, s2.rhs)


def test_canonical_needs_full_degree_a():
    disc = poly_disc(6, 3, 4, 2)
    flat = dataclasses.replace(disc, a=tuple(p.padded(3) * 0.0 + Poly([1.0]) for p in disc.a))
    with pytest.raises(asm.AssemblyError):
        asm.assemble_canonical(flat)
    with pytest.raises(asm.AssemblyError):
        asm.assemble_canonical(dataclasses.replace(disc, d=0))
    with pytest.raises(asm.AssemblyError):
        asm.assemble_autonomous(disc)
    with pytest.raises(asm.AssemblyError):
        asm.assemble(disc, "sideways")


def test_autonomous_rejects_zero_a():
    p = MfdeProblem.from_strings("0", "1", "1", "1", "1", K=3)
    disc = discretize(p, 4, 0)
    with pytest.raises(asm.AssemblyError):
        asm.assemble(disc, "canonical")
    x, _ = lu_solve(*(lambda s: (s.matrix, s.rhs))(asm.assemble(disc, "direct")))
    assert np.all(np.isfinite(x))


# ----------------------------------------------------------------- solved systems


@pytest.mark.parametrize("seed", range(5))
def test_direct_solution_satisfies_perturbed_equation(seed):
    rng = np.random.default_rng(seed)
    K, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    n = int(rng.integers(d, 9))
    disc = discretize(random_poly_problem(rng, K, d, n), n, d)
    system = asm.assemble_direct(disc)
    x, _ = lu_solve(system.matrix, system.rhs)
    sol = extract(x, system)
    for k in range(K - 1):
        poly, scale = step_residual(sol, disc, k)
        assert np.abs(poly.coeffs).max() <= 1e-9 * (1 + scale)
    assert np.all(perturbed_residual(sol, disc, relative=True) <= 1e-9)


def test_decoupled_steps_recover_exponential():
    p = MfdeProblem.from_strings("1", "0", "0", "exp(t)", "exp(t)", K=3, exact="exp(t)")
    disc = discretize(p, 9, 0)
    assert asm.assemble(disc, "canonical").order == 23
    s = np.linspace(0, 1, 129)
    for path in ("direct", "canonical"):
        system = asm.assemble(disc, path)
        x, _ = lu_solve(system.matrix, system.rhs)
        sol = extract(x, system)
        for k, X in enumerate(sol.steps):
            assert np.abs(X(s) - np.exp(s + k)).max() <= 1e-8


def test_csv_dump(tmp_path):
    disc = poly_disc(4, 3, 2, 1)
    system = asm.assemble_direct(disc)
    out = tmp_path / "system.csv"
    asm.dump_csv(system, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][-1] == "rhs" and rows[0][0] == "a[0][0]"
    assert len(rows) == system.order + 1
    np.testing.assert_array_equal(np.array(rows[1:], dtype=float)[:, :-1], system.matrix)
