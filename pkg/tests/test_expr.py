import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from fmk.chart_core import expr as ex
from fmk.chart_core.fields import expr_jet
from fmk.errors import ArityError, ExprSyntaxError, UnknownSymbolError


def value(text, point, n=2, params=None):
    e = ex.parse_expr(text, n, list(params or {}))
    return float(expr_jet(e, np.atleast_2d(point), 0, params).value[0])


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1 + 2*3", 7.0),
        ("2^3^2", 512.0),
        ("2**3", 8.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("8/2/2", 2.0),
        ("1 - 2 - 3", -4.0),
        ("2*-3", -6.0),
        ("1.5e1 + 2E-1", 15.2),
        ("t1 + u2", 5.0),
    ],
)
def test_precedence_and_literals(text, expected):
    assert value(text, [2.0, 3.0]) == pytest.approx(expected)


def test_parameters_bind_by_name():
    assert value("kappa*u1", [2.0, 1.0], params={"kappa": 0.5}) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "text, err, pos",
    [
        ("1 +", ExprSyntaxError, 3),
        ("u1 * (u2", ExprSyntaxError, 8),
        ("u3", UnknownSymbolError, 0),
        ("1 + foo", UnknownSymbolError, 4),
        ("log(u1, u2)", ArityError, 6),
        ("u1 $ 2", ExprSyntaxError, 3),
    ],
)
def test_errors_carry_positions(text, err, pos):
    with pytest.raises(err) as info:
        ex.parse_expr(text, 2)
    assert info.value.position == pos


def test_reserved_parameter_names_rejected():
    with pytest.raises(ValueError):
        ex.parse_expr("u1", 2, ["log"])


# random expression trees for round-trip testing
_leaves = st.one_of(
    st.integers(0, 9).map(lambda k: ex.num(float(k))),
    st.sampled_from([ex.coord(1), ex.coord(2), ex.Param("a")]),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: ex.BinOp(t[0], t[1], t[2])),
        st.tuples(children, st.integers(0, 3)).map(lambda t: ex.BinOp("^", t[0], ex.num(float(t[1])))),
        children.map(ex.Neg),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh"]), children).map(lambda t: ex.Func(t[0], t[1])),
    )


trees = st.recursive(_leaves, _extend, max_leaves=12)


@settings(max_examples=100, deadline=None)
@given(trees)
def test_print_parse_round_trip(tree):
    text = ex.to_string(tree)
    again = ex.parse_expr(text, 2, ["a"])
    assert ex.to_string(again) == text
    assert again == tree


def _to_sympy(e, syms, a):
    if isinstance(e, ex.Num):
        return sp.Float(e.value) if e.value != int(e.value) else sp.Integer(int(e.value))
    if isinstance(e, ex.Coord):
        return syms[e.index]
    if isinstance(e, ex.Param):
        return a
    if isinstance(e, ex.Neg):
        return -_to_sympy(e.arg, syms, a)
    if isinstance(e, ex.Func):
        return getattr(sp, e.name)(_to_sympy(e.arg, syms, a))
    l, r = _to_sympy(e.left, syms, a), _to_sympy(e.right, syms, a)
    return {"+": l + r, "-": l - r, "*": l * r, "/": l / r, "^": l**r}[e.op]


@pytest.mark.parametrize(
    "text",
    [
        "u1^2*sin(u2)",
        "exp(u1*u2)/(1 + u1^2)",
        "log(u1^2 + u2)",
        "sqrt(u1)*tanh(u2 - u1)",
        "log(u2^2)",
        "u1^u2",
        "a*cos(u1)^3",
    ],
)
@pytest.mark.parametrize("i", [0, 1])
def test_symbolic_derivative_matches_sympy(text, i):
    x = sp.symbols("x1 x2", positive=True)
    a = sp.Symbol("a")
    e = ex.parse_expr(text, 2, ["a"])
    d = ex.diff(e, i)
    oracle = sp.diff(_to_sympy(e, x, a), x[i])
    p = {x[0]: 1.3, x[1]: 0.7, a: 0.4}
    got = float(expr_jet(d, np.array([[1.3, 0.7]]), 0, {"a": 0.4}).value[0])
    assert got == pytest.approx(float(oracle.subs(p)), rel=1e-12, abs=1e-12)


def test_log_of_square_derivative_is_clean():
    d = ex.diff(ex.parse_expr("log(u2^2)", 2), 1)
    assert value(ex.to_string(d), [0.0, -2.0]) == pytest.approx(-1.0)


def test_substitute_and_free_symbols():
    e = ex.parse_expr("k*u1 + u3", 3, ["k"])
    assert ex.free_coords(e) == {0, 2}
    assert ex.free_params(e) == {"k"}
    s = ex.substitute(e, {"k": 2.0})
    assert ex.free_params(s) == set()
    assert value(ex.to_string(s), [1.0, 0.0, 1.0], n=3) == pytest.approx(3.0)


def test_integral_floats_print_as_integers():
    assert ex.to_string(ex.num(3.0)) == "3"
    assert math.isclose(float(ex.to_string(ex.num(0.1))), 0.1)
