import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossings import covariance as cov
from crossings.crossing_moments import (DegenerateModelError, InfiniteMomentError, MomentResult,
                                        bivariate_density, curve_second_moment, pair_integrand,
                                        regression_at, rice_mean, second_factorial_moment,
                                        variance_of_count)
from crossings.curves import constant_curve, curve_from_expressions, linear_curve
from oracles import conditional_pair_oracle, level_m2_oracle

G = cov.gaussian()


def test_rice_mean_examples():
    assert rice_mean(G, 0.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-15)
    assert rice_mean(cov.gaussian(0.5), 1.0, 2.0) == pytest.approx(2 * math.exp(-0.5) * 2 / math.pi, rel=1e-14)
    assert rice_mean(G, 0.3, 0.0) == 0.0


def _regression_mp(tau):
    with mpmath.workdps(40):
        t = mpmath.mpf(tau)
        r = mpmath.exp(-t * t / 2)
        r1 = -t * r
        r2 = (t * t - 1) * r
        q = 1 - r * r
        sigma2 = 1 - r1 * r1 / q
        rho = (-r2 * q - r * r1 * r1) / (q - r1 * r1)
        return float(sigma2), float(rho)


def test_regression_gaussian_at_one():
    reg = regression_at(G, 1.0, x=0.0)
    s2, rho = _regression_mp(1.0)
    assert reg.sigma2 == pytest.approx(1 - math.exp(-1) / (1 - math.exp(-1)), rel=1e-13)
    assert reg.sigma2 == pytest.approx(0.41802, abs=5e-6)
    # 40-digit evaluation gives rho(1) = -0.8444188
    assert reg.rho == pytest.approx(rho, rel=1e-12)
    assert reg.rho == pytest.approx(-0.844419, abs=5e-7)
    assert reg.m == 0.0


@pytest.mark.parametrize("tau", [0.01, 0.3, 2.0, 4.0])
def test_regression_matches_high_precision(tau):
    s2, rho = _regression_mp(tau)
    reg = regression_at(G, tau)
    assert reg.sigma2 == pytest.approx(s2, rel=1e-7)
    assert reg.rho == pytest.approx(rho, rel=1e-7)


def test_regression_aliases_and_weights():
    reg = regression_at(G, 0.7, x=1.0)
    assert reg.beta1 == reg.alpha2 and reg.beta2 == reg.alpha1
    r, r1 = math.exp(-0.245), -0.7 * math.exp(-0.245)
    assert reg.alpha1 == pytest.approx(r1 * r / (1 - r * r), rel=1e-12)
    assert reg.alpha2 == pytest.approx(-r1 / (1 - r * r), rel=1e-12)
    assert reg.m == pytest.approx(r1 / ((1 + r) * math.sqrt(reg.sigma2)), rel=1e-12)


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.5])
def test_cosine_is_degenerate(tau):
    with pytest.raises(DegenerateModelError):
        regression_at(cov.cosine(), tau)


def test_bivariate_density_examples():
    c = cov.cosine()
    assert bivariate_density(c, math.pi / 2, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert bivariate_density(c, math.pi / 2, 1.0) == pytest.approx(math.exp(-1) / (2 * math.pi), rel=1e-12)
    taus = 10.0 ** -np.arange(1, 6)
    dens = np.array([bivariate_density(G, t, 0.0) for t in taus])
    expect = 1 / (2 * math.pi * np.sqrt(-np.expm1(-taus ** 2)))
    np.testing.assert_allclose(dens, expect, rtol=1e-9)


@pytest.mark.parametrize("x,t", [(0.0, 1.0), (0.5, 3.0), (1.5, 2.0)])
def test_m2_matches_conditioning_oracle(x, t):
    lo = 1e-3
    full = second_factorial_moment(G, x, t)
    head = second_factorial_moment(G, x, t, delta=lo)
    assert full.m2 - head.m2_delta == pytest.approx(level_m2_oracle(G, x, t, lo), abs=1e-9)


@pytest.mark.parametrize("tau", [1e-3, 0.05, 0.7, 2.0])
def test_curve_pair_integrand_matches_oracle(tau):
    curve = curve_from_expressions("0.3 + sin(s)", "cos(s)")
    t1 = 0.4
    want = conditional_pair_oracle(G, tau, 0.3 + math.sin(t1), 0.3 + math.sin(t1 + tau),
                                   math.cos(t1), math.cos(t1 + tau))
    assert pair_integrand(G, curve, t1, tau) == pytest.approx(want, rel=1e-8, abs=1e-14)


def test_small_horizon_vanishes():
    vals = [second_factorial_moment(G, 0.0, t).m2 for t in (0.4, 0.2, 0.1, 0.05)]
    assert all(v >= 0 for v in vals)
    ratios = [v / t ** 2 for v, t in zip(vals, (0.4, 0.2, 0.1, 0.05))]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert second_factorial_moment(G, 0.0, 0.0).m2 == 0.0


def test_monotone_in_horizon():
    ts = [0.5, 1.0, 2.0, 4.0, 8.0]
    vals = [second_factorial_moment(G, 0.7, t).m2 for t in ts]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("model", [G, cov.matern52(), cov.dyadic(3.0)], ids=lambda m: m.name)
def test_doubled_resolution_within_error(model):
    a = second_factorial_moment(model, 0.5, 2.0)
    b = second_factorial_moment(model, 0.5, 2.0, refine=1)
    assert abs(a.m2 - b.m2) <= a.quad_error
    assert a.variance == pytest.approx(a.m2 + a.rice_mean - a.rice_mean ** 2, rel=1e-15)


def test_geman_failure_gives_sentinel():
    res = second_factorial_moment(cov.synthetic("1/(-log(tau))"), 0.0, 0.4)
    assert res.finite is False and math.isinf(res.m2)
    with pytest.raises(InfiniteMomentError):
        variance_of_count(res)
    res = second_factorial_moment(cov.dyadic(1.5), 0.0, 1.0)
    assert not res.finite


def test_variance_of_count_identity():
    assert variance_of_count(MomentResult(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, True)) == 0.0
    mu = 1.7
    r = MomentResult(1.0, 0.0, mu, mu * mu, 0.0, 0.0, 0, True)
    assert variance_of_count(r) == pytest.approx(mu)


def test_degenerate_model_raises():
    with pytest.raises(DegenerateModelError):
        second_factorial_moment(cov.cosine(), 0.0, 1.0)


def test_interior_singular_lag_is_excluded():
    m = cov.parse_covariance("(cos(tau) + cos(2*tau) + cos(3*tau))/3")
    a = second_factorial_moment(m, 0.3, 7.0)
    b = second_factorial_moment(m, 0.3, 7.0, guard=1e-4)
    assert a.excluded_lags and a.excluded_lags[0] == pytest.approx(2 * math.pi, abs=1e-6)
    assert abs(a.m2 - b.m2) <= a.quad_error + b.quad_error


@pytest.mark.parametrize("x", [0.0, 1.0])
def test_constant_curve_reduces_to_level(x):
    a = curve_second_moment(G, constant_curve(x), 3.0)
    b = second_factorial_moment(G, x, 3.0)
    assert abs(a.m2 - b.m2) <= a.quad_error
    flat = curve_second_moment(G, linear_curve(x, 0.0), 3.0)
    assert flat.m2 == b.m2


def test_sloped_line_against_oracle_slices():
    # inner t1-integral of a sloped line is smooth; check one tau slice by brute force
    curve = linear_curve(0.5, 0.3)
    res = curve_second_moment(G, curve, 2.0)
    assert res.finite and res.m2 > 0
    from scipy import integrate
    tau = 0.8
    want = integrate.quad(lambda t1: conditional_pair_oracle(G, tau, 0.5 + 0.3 * t1, 0.5 + 0.3 * (t1 + tau),
                                                             0.3, 0.3), 0.0, 2.0 - tau, epsabs=1e-11)[0]
    x, w = np.polynomial.legendre.leggauss(24)
    t1 = 0.5 * (2.0 - tau) * (x + 1)
    got = 0.5 * (2.0 - tau) * np.sum(w * pair_integrand(G, curve, t1, np.full_like(t1, tau)))
    assert got == pytest.approx(want, rel=1e-8)


@given(st.floats(-4, 4), st.sampled_from([G, cov.matern52(), cov.dyadic(3.0), cov.gaussian(0.3)]))
def test_drift_bounded_near_zero(x, model):
    taus = 1.0 * 2.0 ** -np.arange(0, 14)
    ms = [abs(regression_at(model, t, x).m) for t in taus]
    assert max(ms) < 10 * (1 + abs(x))
