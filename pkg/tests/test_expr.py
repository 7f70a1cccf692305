import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from equidyn.errors import ExprEvalError, ExprSyntaxError
from equidyn.expr import (BinOp, Call, FUNCTIONS, Neg, Num, Pow, Var, evaluate, parse,
                          to_source)


def test_simple_tree():
    e = parse("-1 + rho2")
    assert e.ast == BinOp("+", Neg(Num(1.0)), Var("rho2"))
    assert e.free_vars == {"rho2"}


def test_example_c4_parameter():
    e = parse("sin(2*a) + 2")
    assert e.ast == BinOp("+", Call("sin", BinOp("*", Num(2.0), Var("a"))), Num(2.0))
    assert evaluate(e, {"a": 0.3}) == pytest.approx(math.sin(0.6) + 2, rel=1e-15)


def test_unbalanced_paren_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("rho2 * (1 - rho2")
    assert err.value.offset == 15


@pytest.mark.parametrize("text, offset", [
    ("1 +", 2), ("sin 2", 0), ("foo(1)", 0), ("pow(x, 1.5)", 7), ("x ^ y", 4),
    ("2 $ 3", 2), ("", 0), ("(1))", 3), ("sin", 0),
])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(ExprSyntaxError) as err:
        parse(text)
    assert err.value.offset == offset


def test_offsets_are_bytes_not_characters():
    # the Greek letter takes two bytes in UTF-8
    with pytest.raises(ExprSyntaxError) as err:
        parse("1 + ρ")
    assert err.value.offset == 4
    with pytest.raises(ExprSyntaxError) as err:
        parse("é + 1")
    assert err.value.offset == 0


def test_unknown_function():
    with pytest.raises(ExprSyntaxError, match="unknown function 'tan'"):
        parse("tan(x)")


def test_precedence():
    assert evaluate(parse("-2^2"), {}) == 4.0      # unary minus binds tighter than ^
    assert evaluate(parse("-(2^2)"), {}) == -4.0
    assert evaluate(parse("2*3^2"), {}) == 18.0
    assert evaluate(parse("1 - 2 - 3"), {}) == -4.0
    assert evaluate(parse("8 / 4 / 2"), {}) == 1.0
    assert evaluate(parse("pow(2, -2)"), {}) == 0.25
    assert evaluate(parse("pi"), {}) == math.pi


def test_evaluation_oracles():
    assert evaluate(parse("-1 + rho2"), {"rho2": math.sqrt(2)}) == pytest.approx(0.41421356237309515)
    assert evaluate(parse("0"), {"anything": 3.0}) == 0.0
    assert evaluate(parse("abs(sin(a/2))"), {"a": math.pi}) == pytest.approx(1.0, abs=1e-15)


def test_vectorized_evaluation():
    out = evaluate(parse("rho1 * cos(th)"), {"rho1": np.array([1.0, 2.0]), "th": np.array([0.0, np.pi])})
    np.testing.assert_allclose(out, [1.0, -2.0])


@pytest.mark.parametrize("text, env", [
    ("1 / (x - 1)", {"x": 1.0}),
    ("sqrt(x)", {"x": -0.5}),
    ("pow(x, -3)", {"x": 0.0}),
    ("exp(x)", {"x": 1000.0}),
    ("y + 1", {}),
])
def test_evaluation_errors_are_structured(text, env):
    with pytest.raises(ExprEvalError) as err:
        evaluate(parse(text), env)
    assert err.value.span is not None


def test_division_error_points_at_subexpression():
    with pytest.raises(ExprEvalError) as err:
        evaluate(parse("2 + 1 / (x - 1)"), {"x": 1.0})
    assert err.value.span == (4, 15)  # "1 / (x - 1)"


# ---- round trip --------------------------------------------------------

names = st.sampled_from(["rho2", "a", "th21", "x"])
leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Num),
    names.map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(sorted(FUNCTIONS)), children).map(lambda t: Call(*t)),
        st.tuples(children, st.integers(-4, 4)).map(lambda t: Pow(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_print_parse_round_trip(tree):
    assert parse(to_source(tree)).ast == tree


@given(trees)
def test_printing_is_idempotent(tree):
    once = to_source(tree)
    assert to_source(parse(once)) == once


@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_evaluation_is_deterministic(a, rho):
    e = parse("sin(a) * pow(rho2, 2) - cos(a / 2) + abs(a) / rho2")
    env = {"a": a, "rho2": rho}
    assert evaluate(e, env) == evaluate(e, env)


# ---- differentiability probe -------------------------------------------

BATTERY = [
    ("3*x^3 - 2*x + 1", lambda x: 9 * x**2 - 2),
    ("sin(x)", math.cos),
    ("cos(2*x)", lambda x: -2 * math.sin(2 * x)),
    ("x * sin(x)", lambda x: math.sin(x) + x * math.cos(x)),
    ("pow(x, 4) + cos(x)^2", lambda x: 4 * x**3 - 2 * math.cos(x) * math.sin(x)),
]


@pytest.mark.parametrize("text, deriv", BATTERY)
@given(x=st.floats(-2, 2))
def test_central_differences_match_analytic_derivatives(text, deriv, x):
    e = parse(text)
    h = 1e-6
    fd = (evaluate(e, {"x": x + h}) - evaluate(e, {"x": x - h})) / (2 * h)
    exact = deriv(x)
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))
