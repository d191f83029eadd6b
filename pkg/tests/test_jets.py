import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossings import expression as ex
from crossings import jets
from crossings.jets import TaylorJet4
from oracles import mp_fd_derivatives


def test_variable_and_constant():
    x = TaylorJet4.variable(2.0)
    np.testing.assert_allclose(x.derivatives(), [2, 1, 0, 0, 0])
    np.testing.assert_allclose(TaylorJet4.constant(3.0).derivatives(), [3, 0, 0, 0, 0])


def test_polynomial_derivatives():
    x = TaylorJet4.variable(1.5)
    p = x ** 4 - 2 * x ** 3 + x
    a = 1.5
    expect = [a ** 4 - 2 * a ** 3 + a, 4 * a ** 3 - 6 * a ** 2 + 1, 12 * a ** 2 - 12 * a, 24 * a - 12, 24]
    np.testing.assert_allclose(p.derivatives(), expect, rtol=1e-14)


@pytest.mark.parametrize("fn,mp", [(jets.exp, mpmath.exp), (jets.log, mpmath.log), (jets.sin, mpmath.sin),
                                   (jets.cos, mpmath.cos), (jets.sqrt, mpmath.sqrt)])
def test_elementary_functions_match_mpmath(fn, mp):
    a = 0.7
    got = fn(TaylorJet4.variable(a)).derivatives()
    want = [float(mpmath.diff(mp, a, k)) for k in range(5)]
    np.testing.assert_allclose(got, want, rtol=1e-13)


def test_division_and_fractional_power():
    x = TaylorJet4.variable(0.8)
    got = (1 / (1 + x ** 2)) ** 1.5
    f = lambda t: (1 / (1 + t ** 2)) ** mpmath.mpf(1.5)
    want = [float(mpmath.diff(f, 0.8, k)) for k in range(5)]
    np.testing.assert_allclose(got.derivatives(), want, rtol=1e-12)


def test_jet_exponent():
    x = TaylorJet4.variable(1.2)
    got = x ** x
    want = [float(mpmath.diff(lambda t: t ** t, 1.2, k)) for k in range(5)]
    np.testing.assert_allclose(got.derivatives(), want, rtol=1e-12)


def test_vectorized_points():
    x = TaylorJet4.variable(np.array([0.1, 0.5, 2.0]))
    e = jets.exp(-x * x / 2)
    np.testing.assert_allclose(e.d2, (x.d0 ** 2 - 1) * np.exp(-x.d0 ** 2 / 2), rtol=1e-14)


SMOOTH = ["exp(-tau^2/2)", "cos(2*tau)*exp(-tau)", "1/(1+tau^2)", "sqrt(1+tau^2)*sin(tau)",
          "log(2+cos(tau))", "(1+tau)^(-2.5)", "exp(-tau)*(1+tau+tau^2/3)"]


def _compare(text, tau):
    node = ex.parse(text)
    got = ex.evaluate_jet(node, "tau", tau).derivatives()
    want = mp_fd_derivatives(node, tau)
    for g, w in zip(got, want):
        assert abs(float(g) - w) <= 1e-5 * max(abs(w), 1e-3)


@given(st.sampled_from(SMOOTH), st.floats(0.05, 3.0))
def test_jets_match_high_precision_finite_differences(text, tau):
    _compare(text, tau)
