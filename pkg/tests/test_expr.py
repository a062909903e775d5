import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfde_tau import expr as ex


def ev(text, t):
    return ex.evaluate(ex.parse(text), t)


def test_polynomial_expression_evaluates():
    assert ev("t^3 - t^2 + t + 5", 1.0) == 6.0


def test_functions_and_constants():
    assert ev("sin(t) + exp(-t) + 2", 0.0) == 3.0
    assert ev("pi", 0.0) == pytest.approx(math.pi)
    assert ev("e", 0.0) == pytest.approx(math.e)
    assert ev("sqrt(t) + ln(t)", 4.0) == pytest.approx(2 + math.log(4))


def test_precedence_and_associativity():
    assert ev("-2^2", 0.0) == -4.0
    assert ev("2^3^2", 0.0) == 2.0**9
    assert ev("8 / 4 / 2", 0.0) == 1.0
    assert ev("1 - 2 - 3", 0.0) == -4.0
    assert ev("2 ** 3", 0.0) == 8.0
    assert ev("+t", 3.0) == 3.0


def test_coefficient_formulas_from_catalog():
    a3 = "(cos(t) - exp(-t)) / (sin(t) + exp(-t) + 2)"
    assert ev(a3, 0.0) == 0.0
    assert ev("-0.5*(t + 2)^(-3/2)", 2.0) == pytest.approx(-1 / 16)


def test_vectorized_evaluation():
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(ev("t^2 + 1", t), t**2 + 1)
    assert isinstance(ev("t", 0.5), float)


@pytest.mark.parametrize(
    "text, t",
    [("1/t", 0.0), ("ln(t)", 0.0), ("ln(t)", -1.0), ("sqrt(t)", -1.0), ("t^0.5", -2.0), ("t^(-1)", 0.0), ("exp(t)", 1e4)],
)
def test_domain_errors(text, t):
    with pytest.raises(ex.EvalDomainError) as info:
        ev(text, t)
    assert info.value.t == t


def test_domain_error_reports_first_bad_point():
    with pytest.raises(ex.EvalDomainError) as info:
        ev("ln(t)", np.array([1.0, 2.0, -3.0, 0.0]))
    assert info.value.t == -3.0


@pytest.mark.parametrize(
    "text, offset",
    [("t +", 3), ("(t", 2), ("2*", 2), ("", 0), ("t ^ ^ 2", 4), ("foo(t)", 0), ("t $ 2", 2), ("sin t", 4)],
)
def test_parse_errors_carry_offset(text, offset):
    with pytest.raises(ex.ParseError) as info:
        ex.parse(text)
    assert info.value.offset == offset


def test_parse_error_lists_expected_tokens():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("t +")
    assert "t" in info.value.expected


def test_derivative_rules():
    assert ex.to_string(ex.differentiate(ex.parse("sin(t)"))) == "cos(t)"
    d = ex.differentiate(ex.parse("ln(t^2 + 1)"))
    assert isinstance(d, ex.BinOp) and d.op == "/"
    assert ex.differentiate(ex.parse("0.7*t")) == ex.Const(0.7)


@pytest.mark.parametrize(
    "text",
    ["sin(t)*cos(t)", "exp(2*t)/(t + 3)", "sqrt(t^2 + 1)", "ln(t + 5)", "(t + 2)^(-3/2)", "exp(1/sqrt(t + 2))"],
)
def test_derivative_matches_finite_difference(text):
    e = ex.parse(text)
    d = ex.differentiate(e)
    t = np.linspace(0.1, 2.0, 9)
    h = 1e-6
    fd = (ex.evaluate(e, t + h) - ex.evaluate(e, t - h)) / (2 * h)
    np.testing.assert_allclose(ex.evaluate(d, t), fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("text", ["t^t", "2^t"])
def test_variable_exponent_is_not_differentiable(text):
    with pytest.raises(ex.DifferentiationError):
        ex.differentiate(ex.parse(text))


def test_shift_and_substitute():
    e = ex.parse("t^2 + 1")
    assert ex.evaluate(ex.shift(e, 1.0), 2.0) == 10.0
    assert ex.evaluate(ex.substitute(e, ex.parse("2*t")), 1.0) == 5.0


def test_folding_of_constants():
    assert ex.add(ex.Const(1.0), ex.Const(2.0)) == ex.Const(3.0)
    assert ex.mul(ex.ZERO, ex.T) == ex.ZERO
    assert ex.mul(ex.ONE, ex.T) == ex.T
    assert ex.is_constant(ex.parse("sin(pi)/2"))
    assert not ex.is_constant(ex.parse("t + 1"))


_atoms = st.sampled_from(["t", "2", "0.5", "pi", "(t + 1)", "sin(t)", "exp(t/4)", "cos(2*t)"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*", "/", "^2", "neg", "fn"]))
    left = draw(expressions(depth=depth - 1))
    if op == "neg":
        return f"-({left})"
    if op == "fn":
        return f"{draw(st.sampled_from(['sin', 'cos', 'exp']))}(({left})/8)"
    if op == "^2":
        return f"({left})^2"
    right = draw(expressions(depth=depth - 1))
    if op == "/":
        return f"({left}) / (({right})^2 + 1)"
    return f"({left}) {op} ({right})"


@settings(max_examples=150, deadline=None)
@given(expressions(), st.floats(-1.0, 1.0))
def test_to_string_round_trips(text, t):
    e = ex.parse(text)
    again = ex.parse(ex.to_string(e))
    v1, v2 = ex.evaluate(e, t), ex.evaluate(again, t)
    assert v2 == pytest.approx(v1, rel=1e-12, abs=1e-12)
