import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solitonlab import dsl
from solitonlab.dsl import EvaluationError, ExpressionError, differentiate, evaluate, parse_expression

from astgen import central_difference, random_ast

P = np.array([0.3, -0.7, 0.45])


@pytest.mark.parametrize(
    "source, expected",
    [
        ("1 + 2*3", 7.0),
        ("-x0^2", -0.09),
        ("2^3^2", 512.0),
        ("(1 + x1)*(1 - x1)", 1 - 0.49),
        ("pi", math.pi),
        ("e^x2", math.exp(0.45)),
        ("sinh(x0) + cosh(x0) - exp(x0)", 0.0),
        ("sqrt(4)/tanh(1)", 2 / math.tanh(1)),
        ("1.5e-1 * 2", 0.3),
        ("x0 - -x1", 0.3 - 0.7),
    ],
)
def test_parse_and_evaluate(source, expected):
    assert evaluate(parse_expression(source), P) == pytest.approx(expected, abs=1e-14)


def test_aliases_and_parameters():
    expr = parse_expression("kappa*t^2/2 + sin(theta)", ["kappa"], ("t", "theta", "phi"))
    assert evaluate(expr, P, {"kappa": 2.0}) == pytest.approx(0.09 + math.sin(-0.7))
    assert dsl.free_parameters(expr) == {"kappa"}


@pytest.mark.parametrize(
    "source, fragment",
    [
        ("x0 + y", "unknown identifier"),
        ("foo(x0)", "unknown function"),
        ("sin(x0, x1)", "argument"),
        ("x0 +", "unexpected"),
        ("(x0", r"expected '\)'"),
        ("x0 $ 2", "position"),
    ],
)
def test_parse_errors(source, fragment):
    with pytest.raises(ExpressionError, match=fragment):
        parse_expression(source)


def test_parse_error_carries_position():
    with pytest.raises(ExpressionError) as info:
        parse_expression("x0 + * x1")
    assert info.value.position == 5


@pytest.mark.parametrize("source", ["log(x0 - 1)", "sqrt(x1)", "1/(x0 - 0.3)", "x1^0.5"])
def test_evaluation_domain_errors(source):
    with pytest.raises(EvaluationError):
        evaluate(parse_expression(source), P)


def test_batch_evaluation_shape():
    pts = np.random.default_rng(0).uniform(-1, 1, size=(4, 5, 3))
    out = evaluate(parse_expression("x0*x1 + 1"), pts)
    assert out.shape == (4, 5)
    assert np.allclose(out, pts[..., 0] * pts[..., 1] + 1)
    assert evaluate(parse_expression("3"), pts).shape == (4, 5)


def test_known_derivatives():
    expr = parse_expression("sin(x0)*x1^3 + exp(2*x2)")
    d0 = differentiate(expr, 0)
    d1 = differentiate(expr, "x1")
    d22 = differentiate(differentiate(expr, 2), 2)
    x, y, z = P
    assert evaluate(d0, P) == pytest.approx(math.cos(x) * y**3)
    assert evaluate(d1, P) == pytest.approx(3 * math.sin(x) * y**2)
    assert evaluate(d22, P) == pytest.approx(4 * math.exp(2 * z))


def test_parameter_derivative():
    expr = parse_expression("1/(1 + kappa*x0^2)", ["kappa"])
    d = differentiate(expr, "kappa")
    assert evaluate(d, P, {"kappa": 0.5}) == pytest.approx(-0.09 / (1 + 0.045) ** 2)


def test_smart_constructors_fold():
    x = dsl.Var("x0")
    assert dsl.mul(dsl.ZERO, x) == dsl.ZERO
    assert dsl.add(x, dsl.ZERO) == x
    assert dsl.mul(dsl.Const(2.0), dsl.Const(3.0)) == dsl.Const(6.0)
    assert differentiate(parse_expression("x1^2"), 0) == dsl.ZERO


def test_derivative_size_stays_bounded():
    # smart constructors keep third derivatives of the catalog-style metrics small
    expr = parse_expression("4/(1 + x0^2 + x1^2 + x2^2)^2")
    d3 = differentiate(differentiate(differentiate(expr, 0), 1), 2)
    assert dsl.node_count(d3) < 400


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2), st.integers(0, 2))
def test_mixed_partials_commute(seed, i, j):
    rng = np.random.default_rng(seed)
    expr = random_ast(rng, 4)
    p = rng.uniform(-1, 1, 3)
    a = evaluate(differentiate(differentiate(expr, i), j), p)
    b = evaluate(differentiate(differentiate(expr, j), i), p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_derivative_matches_finite_difference(seed, axis):
    rng = np.random.default_rng(seed)
    expr = random_ast(rng, 4)
    p = rng.uniform(-0.9, 0.9, 3)
    exact = evaluate(differentiate(expr, axis), p)
    approx = central_difference(expr, p, axis)
    assert abs(exact - approx) <= 1e-5 * max(1.0, abs(exact))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_printed_form_reparses(seed):
    rng = np.random.default_rng(seed)
    expr = random_ast(rng, 4)
    p = rng.uniform(-1, 1, 3)
    again = parse_expression(str(expr))
    assert evaluate(again, p) == pytest.approx(evaluate(expr, p), rel=1e-12, abs=1e-12)
