import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from crossings import hermite
from crossings.hermite import abs_product_exact, bvn_cdf, hermite_coeffs, mehler_cross, mehler_series
from oracles import abs_product_quadrature, gauss_hermite_expectation

SQ = math.sqrt(2 / math.pi)


def test_coefficients_at_zero():
    a = hermite_coeffs(0.0, 4).a
    assert a[0] == pytest.approx(SQ, rel=1e-15)
    assert a[1] == 0.0
    assert a[2] == pytest.approx(SQ / 2, rel=1e-15)
    assert a[3] == 0.0


def test_order_below_two_rejected():
    with pytest.raises(ValueError):
        hermite_coeffs(0.3, 1)


def test_hermite_recurrence_matches_numpy():
    x = np.linspace(-3, 3, 7)
    for n in range(8):
        c = np.zeros(n + 1)
        c[n] = 1
        np.testing.assert_allclose(hermite.hermite_he(n, x)[n], np.polynomial.hermite_e.hermeval(x, c),
                                   rtol=1e-12, atol=1e-12)


@given(st.floats(-4, 4))
def test_coefficient_identities(m):
    c = hermite_coeffs(m, 6)
    assert abs(c.a[0] - (-m * c.a[1] + SQ * math.exp(-m * m / 2))) < 1e-12
    d = hermite_coeffs(-m, 6)
    assert d.a[0] == pytest.approx(c.a[0], abs=1e-15)
    assert d.a[1] == pytest.approx(-c.a[1], abs=1e-15)


@pytest.mark.parametrize("m", [-3.0, -1.2, 0.0, 0.5, 2.0, 3.0])
def test_parseval_converges(m):
    # |z - m| has a kink, so the tail of sum a_k^2 k! decays like K^(-3/2)
    target = gauss_hermite_expectation(lambda z: (z - m) ** 2)
    assert target == pytest.approx(1 + m * m, rel=1e-12)
    gaps = [target - hermite_coeffs(m, K).parseval_sum() for K in (60, 240, 960)]
    assert all(g > 0 for g in gaps)
    assert gaps[0] < 1e-3
    for a, b in zip(gaps, gaps[1:]):
        assert 0.09 < b / a < 0.16
    assert hermite_coeffs(m, 4000).parseval_sum() == pytest.approx(target, abs=1e-6)


def test_large_order_coefficients_stay_finite():
    a = hermite_coeffs(1.3, 400).a
    assert np.all(np.isfinite(a))
    np.testing.assert_allclose(a[:8], hermite_coeffs(1.3, 7).a, rtol=1e-13)


@pytest.mark.parametrize("m", [-2.0, 0.0, 0.7])
def test_coefficients_are_projections(m):
    # a_k = E[|Z - m| He_k(Z)] / k!
    c = hermite_coeffs(m, 6)
    for k in range(7):
        e = np.zeros(k + 1)
        e[k] = 1
        z, w = np.polynomial.legendre.leggauss(200)
        pieces = 0.0
        for lo, hi in ((-12.0, m), (m, 12.0)):
            x = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
            f = np.abs(x - m) * np.polynomial.hermite_e.hermeval(x, e) * stats.norm.pdf(x)
            pieces += 0.5 * (hi - lo) * np.sum(w * f)
        assert c.a[k] == pytest.approx(pieces / math.factorial(k), abs=1e-13)


def test_mehler_examples():
    assert mehler_cross(0.0, 0.0, 0.0) == pytest.approx(2 / math.pi, rel=1e-14)
    assert mehler_cross(0.0, 0.0, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert mehler_cross(0.0, 0.0, -1.0) == pytest.approx(1.0, rel=1e-14)
    assert mehler_cross(0.5, -0.5, -0.3) == pytest.approx(abs_product_quadrature(0.5, -0.5, -0.3), abs=1e-8)


def test_mehler_rejects_bad_rho():
    with pytest.raises(ValueError):
        mehler_cross(0.1, 0.2, 1.0001)
    with pytest.raises(ValueError):
        mehler_cross(0.1, 0.2, 0.5, tol=0.0)


def test_arctan_closed_form_at_zero_shift():
    # E|Z1 Z2| = (2/pi)(sqrt(1-rho^2) + rho arcsin rho)
    for rho in (-0.999, -0.9, -0.4, 0.2, 0.95, 0.995):
        want = 2 / math.pi * (math.sqrt(1 - rho * rho) + rho * math.asin(rho))
        assert mehler_cross(0.0, 0.0, rho) == pytest.approx(want, rel=1e-11)


def test_bvn_cdf_matches_scipy():
    rng = np.random.default_rng(5)
    for _ in range(40):
        h, k = rng.normal(size=2) * 1.5
        rho = rng.uniform(-0.99, 0.99)
        ref = stats.multivariate_normal(mean=[0, 0], cov=[[1, rho], [rho, 1]]).cdf([h, k])
        assert float(bvn_cdf(h, k, rho)) == pytest.approx(ref, abs=1e-7)


def test_series_survives_two_vanishing_terms():
    # m1 = 0 kills odd terms and He_2(-1) = 0 kills the k = 4 term, so k = 3, 4, 5 vanish
    for m2 in (1.0, -1.0, math.sqrt(3.0)):
        s, _ = mehler_series(0.0, m2, 0.5, tol=1e-13)
        assert float(s) == pytest.approx(float(abs_product_exact(0.0, m2, 0.5)), abs=1e-11)


def test_closed_form_with_subnormal_shift():
    # E|Z1 Z2| = (2/pi)(sqrt(1 - rho^2) + rho arcsin rho)
    want = 2 / math.pi * (math.sqrt(0.75) + 0.5 * math.asin(0.5))
    assert float(abs_product_exact(2e-16, 1e-308, 0.5)) == pytest.approx(want, abs=1e-12)
    assert float(abs_product_exact(0.0, 5e-324, 0.5)) == pytest.approx(want, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.99, 0.99))
def test_series_matches_closed_form(m1, m2, rho):
    s, _ = mehler_series(m1, m2, rho, tol=1e-13)
    assert float(s) == pytest.approx(float(abs_product_exact(m1, m2, rho)), abs=1e-9)


@given(st.floats(-3, 3), st.floats(-1, 0))
def test_level_factor_lower_bound(m, rho):
    assert mehler_cross(m, -m, rho) >= 2 / math.pi * math.exp(-m * m) - 1e-9


@given(st.floats(-3, 3), st.floats(-1, 1))
def test_level_factor_upper_bound(m, rho):
    assert mehler_cross(m, -m, rho) <= 1 + m * m + 1e-9


@given(st.floats(-3, 3), st.floats(-1, 1))
def test_level_factor_symmetry(m, rho):
    a = mehler_cross(m, -m, rho)
    assert a == mehler_cross(-m, m, rho)
    assert a == pytest.approx(mehler_cross(-m, m, rho), rel=0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1))
def test_swap_symmetry(m1, m2, rho):
    assert mehler_cross(m1, m2, rho) == pytest.approx(mehler_cross(m2, m1, rho), abs=1e-11)


def test_vectorized_call_and_truncation_length():
    m = np.linspace(-2, 2, 5)
    v, K = hermite.mehler_cross_k(m, -m, np.full(5, -0.5))
    assert v.shape == (5,) and np.all(K > 2)
    v2, K2 = hermite.mehler_cross_k(0.3, -0.3, -0.995)
    assert int(K2) == 0  # closed form beyond the series limit
