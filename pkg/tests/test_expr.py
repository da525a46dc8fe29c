import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aereach import model_path
from aereach.expr import (Add, Const, Div, ExprDomainError, Func, ModelError, Mul, Neg, Param, PowInt, Sub,
                          SystemModel, Var, eval_expr, load_model, parse_expr, parse_model, to_text, variables)
from aereach.interval import Box, DomainError, Interval

SIR_TEXT = """
system sir
states x1, x2, x3
param beta = 0.34, gamma = 0.05, Delta = 0.5
init x1 = [0.79, 0.80], x2 = [0.19, 0.20], x3 = [0, 0.1]
dynamics
  x1' = x1 - beta*x1*x2*Delta
  x2' = x2 + (beta*x1*x2 - gamma*x2)*Delta
  x3' = x3 + gamma*x2*Delta
"""


def test_sir_model_parses():
    m = parse_model(SIR_TEXT)
    assert m.n == 3 and m.states == ("x1", "x2", "x3")
    assert m.params == {"beta": 0.34, "gamma": 0.05, "Delta": 0.5}
    assert m.init[0].contains(Interval(0.79, 0.80)) and m.init[2].contains(Interval(0.0, 0.1))
    assert isinstance(m.dynamics[0], Sub)
    assert variables(m.dynamics[1]) == {"x1", "x2"}


def test_init_boxes_bracket_decimal_literals():
    m = parse_model(SIR_TEXT)
    outer, inner = m.init[0], m.init_inner[0]
    # 0.79 and 0.80 are not floats: outer widens, inner narrows, by one step each
    assert outer.lo < inner.lo and inner.hi < outer.hi
    assert math.nextafter(outer.lo, 1) == inner.lo and math.nextafter(inner.hi, 1) == outer.hi
    assert inner.lo > 0.79 - 1e-15 and inner.hi < 0.80 + 1e-15
    # 0 is exact
    assert m.init[2].lo == 0.0 and m.init_inner[2].lo == 0.0


def test_undeclared_identifier_reports_location():
    text = "states x1\ninit x1 = [0, 1]\ndynamics\n  x1' = x1 + x9\n"
    with pytest.raises(ModelError) as info:
        parse_model(text)
    err = info.value
    assert "x9" in str(err)
    assert (err.line, err.col) == (4, 14)


def test_disturbance_is_registered_as_universal_input():
    text = "states x\ndisturbance w in [-1,1]\ninit x = [0, 1]\ndynamics\n  x' = x + w\n"
    m = parse_model(text)
    assert m.disturbances == ("w",) and m.controls == ()
    assert m.disturbance_box[0] == Interval(-1.0, 1.0)
    assert m.variables == ("x", "w")


def test_controls_and_pi_mapping():
    text = ("states x, y\ncontrol u in [0, 0.5]\ndisturbance w in [0, 1]\n"
            "init x = 0, y = [1, 2]\npi u -> y\ndynamics\n  x' = x + u\n  y' = y*w\n")
    m = parse_model(text)
    assert m.pi == {"u": 1}
    assert m.init[0] == Interval(0.0)


@pytest.mark.parametrize("text, fragment", [
    ("states x\ninit x = [0, 1]\ndynamics\n  x' = x +\n", "end of line"),
    ("states x, y\ninit x = [0, 1], y = [0, 1]\ndynamics\n  x' = x\n", "dimension mismatch"),
    ("states x\ndisturbance w in [0,1]\ninit x = 0\npi w -> x\ndynamics\n  x' = x+w\n", "disturbance"),
    ("states x\ncontrol u in [0,1]\ninit x = 0\npi u -> z\ndynamics\n  x' = x+u\n", "nonexistent"),
    ("states x\ninit x = [1, 0]\ndynamics\n  x' = x\n", "empty interval"),
    ("states x\ninit x = 0\ndynamics\n  x' = x^0.5\n", "integer"),
    ("states x\ninit x = 0\nx' = x\n", "dynamics"),
    ("states x\ninit x = 0\ndynamics\n  x' = x $ 2\n", "unexpected character"),
    ("states x, x\n", "twice"),
    ("states x\ninit x = 0\ndynamics\n  x' = x\n  x' = x\n", "two update"),
    ("frobnicate\n", "unknown statement"),
])
def test_model_errors(text, fragment):
    with pytest.raises(ModelError) as info:
        parse_model(text)
    assert fragment in str(info.value)
    assert info.value.line >= 1 and info.value.col >= 1


def test_model_rejects_pi_onto_disturbance_when_built_directly():
    with pytest.raises(ValueError):
        SystemModel(name="m", states=("x",), dynamics=(Var("x"),), init=Box([0.0]),
                    disturbances=("w",), disturbance_box=Box([(0, 1)]), pi={"w": 0})


@pytest.mark.parametrize("name", ["testmodel", "sir", "sir_point", "honeybees"])
def test_bundled_models_load(name):
    m = load_model(model_path(name))
    assert m.n == len(m.dynamics) and m.horizon >= 1


def test_sir_point_has_degenerate_third_state():
    m = load_model(model_path("sir_point"))
    assert m.init[2] == Interval(0.0)


def test_eval_examples():
    e = parse_expr("x^2 - x")
    assert eval_expr(e, {"x": Interval(2.0, 3.0)}) == Interval(1.0, 7.0)
    assert eval_expr(e, {"x": 2.5}) == 3.75
    assert eval_expr(parse_expr("3.75"), {"x": Interval(0, 1)}) == 3.75


def test_eval_with_params():
    e = parse_expr("k*x", params=["k"])
    assert isinstance(e.left, Param)
    assert eval_expr(e, {"x": 2.0}, {"k": 1.5}) == 3.0


def test_domain_error_names_subexpression():
    with pytest.raises(ExprDomainError) as info:
        eval_expr(parse_expr("1 + log(x - 2)"), {"x": Interval(0.0, 1.0)})
    assert "log" in info.value.subexpr
    assert isinstance(info.value, DomainError)


def test_parser_precedence():
    assert parse_expr("-x^2") == Neg(PowInt(Var("x"), 2))
    assert parse_expr("a - b - c") == Sub(Sub(Var("a"), Var("b")), Var("c"))
    assert parse_expr("a / b * c") == Mul(Div(Var("a"), Var("b")), Var("c"))
    assert parse_expr("x**-2") == PowInt(Var("x"), -2)
    assert parse_expr("sin(x)+1") == Add(Func("sin", Var("x")), Const(1.0))


def test_to_text_minimal_parentheses():
    assert to_text(parse_expr("a - (b - c)")) == "a - (b - c)"
    assert to_text(parse_expr("(a*b)*c")) == "a*b*c"
    assert to_text(parse_expr("(-x)^2")) == "(-x)^2"


leaves = st.one_of(
    st.sampled_from([Var("x"), Var("y")]),
    st.floats(0, 1e6, allow_nan=False).map(Const),
)


def _grow(children):
    binary = st.sampled_from([Add, Sub, Mul, Div])
    return st.one_of(
        st.builds(lambda op, a, b: op(a, b), binary, children, children),
        children.map(Neg),
        st.builds(PowInt, children, st.integers(-3, 4)),
        st.builds(Func, st.sampled_from(["sin", "cos", "exp", "log", "sqrt"]), children),
    )


asts = st.recursive(leaves, _grow, max_leaves=12)


@given(asts)
def test_print_parse_round_trip(e):
    text = to_text(e)
    assert parse_expr(text) == e
    assert to_text(parse_expr(text)) == text


@given(asts, st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 0.5), st.floats(0, 0.5))
def test_center_value_lies_in_interval_value(e, cx, cy, rx, ry):
    box = {"x": Interval(cx - rx, cx + rx), "y": Interval(cy - ry, cy + ry)}
    try:
        enc = eval_expr(e, box)
    except DomainError:
        return
    try:
        with np.errstate(all="ignore"):
            val = eval_expr(e, {"x": box["x"].mid(), "y": box["y"].mid()}, rigorous=False)
    except (DomainError, ZeroDivisionError, OverflowError, ValueError):
        return
    if not isinstance(enc, Interval):
        enc = Interval(enc)
    val = float(val)
    if math.isfinite(val):
        # float evaluation of the real value may be off by a few ulps
        slack = 1e-9 * max(1.0, abs(val))
        assert enc.lo - slack <= val <= enc.hi + slack
