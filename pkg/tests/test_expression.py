import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossings import expression as ex


def test_precedence_and_unary_minus():
    # -tau^2 is -(tau^2), ^ is right associative
    assert ex.evaluate_numpy(ex.parse("-tau^2"), tau=3.0) == -9.0
    assert ex.evaluate_numpy(ex.parse("2^3^2"), tau=0.0) == 512.0
    assert ex.evaluate_numpy(ex.parse("1 - 2 - 3"), tau=0.0) == -4.0
    assert ex.evaluate_numpy(ex.parse("8 / 4 / 2"), tau=0.0) == 1.0
    assert ex.evaluate_numpy(ex.parse("exp(-tau^2/2)"), tau=1.0) == pytest.approx(math.exp(-0.5))


def test_numbers_with_exponent():
    assert ex.evaluate_numpy(ex.parse("1.5e-3*tau"), tau=2.0) == pytest.approx(3e-3)
    assert ex.evaluate_numpy(ex.parse(".5"), tau=0.0) == 0.5


def test_syntax_error_reports_position():
    with pytest.raises(ex.ExpressionSyntaxError) as info:
        ex.parse("exp(-tau^2/2")
    assert info.value.pos == 12
    assert "^" in str(info.value)
    with pytest.raises(ex.ExpressionSyntaxError):
        ex.parse("tau +* 2")


def test_unknown_identifier():
    with pytest.raises(ex.UnknownIdentifierError) as info:
        ex.parse("exp(-x^2)")
    assert "'x'" in str(info.value)
    assert info.value.pos == 5


def test_division_by_zero_is_ieee():
    with np.errstate(divide="ignore"):
        assert ex.evaluate_numpy(ex.parse("1/tau"), tau=0.0) == math.inf


def test_free_variables():
    assert ex.free_variables(ex.parse("sin(s)*2", variables=("s",))) == {"s"}


_leaf = st.one_of(st.just("tau"), st.floats(0.1, 5).map(lambda v: f"{v!r}"))


def _combine(children):
    binary = st.tuples(children, st.sampled_from("+-*/"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    call = st.tuples(st.sampled_from(["exp", "sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})")
    neg = children.map(lambda c: f"-{c}")
    return st.one_of(binary, call, neg)


expressions = st.recursive(_leaf, _combine, max_leaves=8)


@given(expressions)
def test_round_trip_evaluates_identically(text):
    node = ex.parse(text)
    again = ex.parse(ex.to_string(node))
    assert again == node
    pts = np.random.default_rng(0).uniform(0.01, 3.0, 100)
    with np.errstate(all="ignore"):
        a = ex.evaluate_numpy(node, tau=pts)
        b = ex.evaluate_numpy(again, tau=pts)
    np.testing.assert_array_equal(np.asarray(a) + 0 * pts, np.asarray(b) + 0 * pts)
