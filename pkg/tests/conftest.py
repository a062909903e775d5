import numpy as np
import pytest

from mfde_tau.problem import MfdeProblem


def poly_string(coeffs) -> str:
    """Power-basis coefficients as an expression in t."""
    return " + ".join(f"({float(c)!r})*t^{i}" for i, c in enumerate(coeffs))


def random_poly_problem(rng: np.random.Generator, K: int, d: int, n: int) -> MfdeProblem:
    """Polynomial coefficients of degree d with |leading a| >= 0.5, random polynomial boundary data."""
    a = rng.uniform(-2, 2, d + 1)
    if d >= 1:
        a[d] = rng.choice([-1, 1]) * rng.uniform(0.5, 2)
    b = rng.uniform(-2, 2, d + 1)
    c = rng.uniform(-2, 2, d + 1)
    psi1 = rng.uniform(-2, 2, rng.integers(1, n + 2))
    psi2 = rng.uniform(-2, 2, rng.integers(1, n + 2))
    return MfdeProblem.from_strings(
        poly_string(a), poly_string(b), poly_string(c), poly_string(psi1), poly_string(psi2), K
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
