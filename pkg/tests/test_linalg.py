import numpy as np
import pytest

from mfde_tau.assemble import assemble
from mfde_tau.linalg import SingularSystemError, equilibration, lu_solve
from mfde_tau.problem import catalog, discretize


def test_identity_system():
    b = np.array([1.0, -2.0, 3.5])
    x, diag = lu_solve(np.eye(3), b)
    np.testing.assert_array_equal(x, b)
    assert diag.relative_residual == 0.0
    assert diag.cond_estimate == pytest.approx(1.0)


def test_diagonal_system():
    x, _ = lu_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0])
    np.testing.assert_allclose(x, [1.0, 2.0])


def test_singular_matrix_is_reported():
    with pytest.raises(SingularSystemError) as info:
        lu_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])
    assert info.value.column == 1
    with pytest.raises(SingularSystemError):
        lu_solve(np.zeros((3, 3)), np.ones(3))
    with pytest.raises(np.linalg.LinAlgError):
        lu_solve([[1.0, 1.0], [1.0, 1.0 + 1e-15]], [1.0, 2.0])


def test_shape_checks():
    with pytest.raises(ValueError):
        lu_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        lu_solve(np.eye(2), np.ones(3))


def test_badly_scaled_but_regular_system():
    A = np.diag([1e-20, 1.0, 1e20])
    x, diag = lu_solve(A, np.array([1e-20, 2.0, 3e20]))
    np.testing.assert_allclose(x, [1.0, 2.0, 3.0])
    assert diag.cond_estimate <= 4.0


def test_equilibration_uses_powers_of_two():
    A = np.array([[3.0, 1000.0], [0.01, 0.02]])
    r, c = equilibration(A)
    assert np.all(np.log2(r) == np.round(np.log2(r)))
    assert np.all(np.log2(c) == np.round(np.log2(c)))
    S = A * r[:, None] * c[None, :]
    assert np.all(np.abs(S).max(axis=1) <= 2) and np.all(np.abs(S).max(axis=1) >= 0.25)


def test_random_systems():
    rng = np.random.default_rng(5)
    for n in (1, 5, 40):
        A = rng.normal(size=(n, n)) + n * np.eye(n)
        x_true = rng.normal(size=n)
        x, diag = lu_solve(A, A @ x_true)
        np.testing.assert_allclose(x, x_true, rtol=1e-10, atol=1e-12)
        assert diag.relative_residual <= 1e-14
        assert diag.min_pivot > 0
        assert set(diag.to_dict()) == {"residual_inf", "relative_residual", "min_pivot", "cond_estimate", "elapsed", "refined"}


def test_large_catalog_system():
    disc = discretize(catalog("exp5", {"K": 101}), 7, 6, check_leading=False)
    system = assemble(disc, "direct")
    assert system.order == 1501
    x, diag = lu_solve(system.matrix, system.rhs)
    assert diag.relative_residual <= 1e-8
    assert np.all(np.isfinite(x))
