import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossings import covariance as cov
from crossings import expression as ex
from crossings.diagnostics import theta_checks
from oracles import mp_fd_derivatives


def test_gaussian_jet_at_zero_is_exact():
    m = cov.parse_covariance("exp(-tau^2/2)", delta_max=5)
    np.testing.assert_array_equal(cov.derivatives_at(m, 0.0).derivatives(), [1, 0, -1, 0, 3])
    assert m.r2_0 == -1.0


def test_cosine_jet_at_zero():
    m = cov.parse_covariance("cos(tau)", delta_max=3)
    np.testing.assert_array_equal(cov.derivatives_at(m, 0.0).derivatives(), [1, 0, -1, 0, 1])


def test_gaussian_at_one():
    d = cov.derivatives_at(cov.gaussian(), 1.0).derivatives()
    assert d[0] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert d[1] == pytest.approx(-math.exp(-0.5), rel=1e-15)
    assert abs(d[2]) < 1e-16


def test_validation_names_the_broken_invariant():
    with pytest.raises(cov.CovarianceValidationError) as info:
        cov.parse_covariance("2*exp(-tau^2)")
    assert "r(0) = 1" in str(info.value)
    assert info.value.measured == pytest.approx(2.0)
    with pytest.raises(cov.CovarianceValidationError, match=r"r'\(0\) = 0"):
        cov.parse_covariance("exp(-tau)*(1+tau)+ 0*tau + sin(tau)/10")
    with pytest.raises(cov.CovarianceValidationError, match=r"\|r\(tau\)\| <= 1"):
        cov.parse_covariance("1 - tau^2/2 + tau^4")


def test_builtins_parse_and_match_expressions():
    g = cov.parse_covariance("gaussian(2)")
    e = cov.parse_covariance("exp(-tau^2/8)")
    taus = np.linspace(0, 4, 9)
    np.testing.assert_allclose(g.jet(taus).d2, e.jet(taus).d2, rtol=1e-14)
    c = cov.parse_covariance("cosine(3)")
    assert c.r2_0 == pytest.approx(-9.0)


def test_lag_out_of_range():
    m = cov.parse_covariance("exp(-tau^2/2)", delta_max=5)
    with pytest.raises(cov.LagOutOfRangeError):
        cov.derivatives_at(m, 6.0)
    with pytest.raises(cov.LagOutOfRangeError):
        cov.derivatives_at(m, -0.1)


def test_theta_examples():
    assert cov.theta_at(cov.gaussian(), 0.1) == pytest.approx(0.1 ** 4 / 8, rel=2e-3)
    exact = float(mpmath.cos(mpmath.mpf("0.1")) - 1 + mpmath.mpf("0.005"))
    assert cov.theta_at(cov.cosine(), 0.1) == pytest.approx(exact, rel=1e-10)
    with pytest.raises(ValueError):
        cov.theta_at(cov.gaussian(), 0.0)


@pytest.mark.parametrize("model", [cov.gaussian(), cov.cosine(), cov.matern52(), cov.dyadic(3.0)],
                         ids=lambda m: m.name)
def test_theta_over_tau2_decreases(model):
    taus = 10.0 ** -np.arange(1, 7)
    q = np.asarray(model.theta(taus)) / taus ** 2
    assert np.all(np.diff(q) < 0)


@pytest.mark.parametrize("model", [cov.gaussian(), cov.cosine(), cov.matern52(), cov.matern32()],
                         ids=lambda m: m.name)
def test_eq1_structure_on_dyadic_grid(model):
    rep = theta_checks(model, 1.0)
    assert rep.theta_positive
    assert rep.limits_ok


def test_one_minus_r_accurate_at_tiny_lags():
    g = cov.gaussian()
    tau = np.array([1e-9, 1e-6, 1e-3])
    np.testing.assert_allclose(g.one_minus_r(tau), -np.expm1(-tau ** 2 / 2), rtol=1e-10)


def test_rough_matern_has_infinite_fourth_derivative():
    m = cov.matern32()
    assert math.isinf(m.r4_0)
    assert cov.matern52().r4_0 == pytest.approx(25.0)


def test_dyadic_mixture_spectral_consistency():
    m = cov.dyadic(1.5)
    lam = np.linspace(0, 4000, 400001)
    f = m.spectral_density(lam)
    # two-sided density: r(tau) = int f cos
    for tau in (0.0, 0.3, 1.0):
        r_num = 2 * np.trapezoid(f * np.cos(lam * tau), lam)
        assert r_num == pytest.approx(float(m.r(tau)), abs=2e-4)
    assert m.r2_0 < 0 and math.isinf(m.r4_0)


def test_dyadic_theta2_matches_direct_difference():
    m = cov.dyadic(2.5)
    tau = np.array([0.5, 0.1, 0.01])
    np.testing.assert_allclose(m.theta2(tau), m.jet(tau).d2 - m.r2_0, rtol=1e-9)


def test_synthetic_model_is_not_simulable():
    s = cov.synthetic("1/(-log(tau))")
    assert not s.simulable
    tau = np.array([0.01, 0.1])
    np.testing.assert_allclose(s.jet(tau).d2, -1 + 1 / -np.log(tau), rtol=1e-12)
    # r' is the integral of r''
    h = 1e-5
    fd = (s.r(0.1 + h) - s.r(0.1 - h)) / (2 * h)
    assert float(s.jet(0.1).d1) == pytest.approx(float(fd), rel=1e-6)


def test_spectral_density_expression_model():
    m = cov.SpectralModel(density="exp(-lambda^2/2)").validate()
    assert float(m.r(1.0)) == pytest.approx(math.exp(-0.5), rel=1e-7)
    assert m.r2_0 == pytest.approx(-1.0, rel=1e-7)


def test_spectral_table_model():
    lam = np.linspace(0, 10, 2001)
    m = cov.SpectralModel(table=np.column_stack([lam, np.exp(-lam ** 2 / 2)])).validate()
    assert float(m.r(0.5)) == pytest.approx(math.exp(-0.125), rel=1e-5)


BUILTIN_EXPRS = ["exp(-tau^2/2)", "exp(-tau^2/(2*0.5^2))", "cos(2*tau)",
                 "(1+sqrt(3)*tau)*exp(-sqrt(3)*tau)",
                 "(1+sqrt(5)*tau+5*tau^2/3)*exp(-sqrt(5)*tau)"]


@given(st.sampled_from(BUILTIN_EXPRS), st.floats(0.05, 4.0))
def test_model_jets_match_finite_differences(text, tau):
    m = cov.parse_covariance(text)
    got = m.jet(tau).derivatives()
    want = mp_fd_derivatives(m.ast, tau)
    for g, w in zip(got, want):
        assert abs(float(g) - w) <= 1e-5 * max(abs(w), 1e-3)


@given(st.floats(0.2, 5.0), st.floats(0.01, 2.0))
def test_gaussian_scale_family(scale, tau):
    m = cov.gaussian(scale)
    d = m.jet(tau).derivatives()
    u = tau / scale
    assert float(d[2]) == pytest.approx((u * u - 1) * math.exp(-u * u / 2) / scale ** 2, rel=1e-12, abs=1e-14 / scale ** 2)
