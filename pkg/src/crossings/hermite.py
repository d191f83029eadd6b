"""Hermite coefficients of |z - m| and Mehler sums for E|(Z1 + m1)(Z2 + m2)|.

Probabilists' Hermite polynomials throughout:
``H_n(x) = (-1)^n e^{x^2/2} d^n/dx^n e^{-x^2/2}``, orthogonal under the
standard normal density with ``E[H_n(Z)^2] = n!``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
MAX_TERMS = 20000
#: beyond this |rho| the series is replaced by the exact closed form
SERIES_RHO_LIMIT = 0.99


def norm_cdf(x):
    """Standard normal CDF via erfc (full relative accuracy in the lower tail)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def hermite_he(n: int, x):
    """Array ``[H_0(x), ..., H_n(x)]`` by ``H_{k+1} = x H_k - k H_{k-1}``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x
    for k in range(1, n):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


@dataclass(frozen=True)
class HermiteCoefficients:
    """Coefficients ``a_0..a_K`` of ``|z - m| = sum_k a_k(m) H_k(z)``."""

    m: float
    K: int
    a: np.ndarray

    def parseval_sum(self) -> float:
        """``sum_k a_k^2 k!``, accumulated on the scaled coefficients ``a_k sqrt(k!)``."""
        stream = _ScaledCoeffs(self.m)
        return float(sum(float(stream.next()) ** 2 for _ in range(self.K + 1)))


def hermite_coeffs(m: float, K: int) -> HermiteCoefficients:
    """``a_0..a_K``: a_0, a_1 from the normal cdf, then ``sqrt(2/pi) He_{l-2}(m) e^{-m^2/2} / l!``.

    Computed as ``b_l / sqrt(l!)`` from the normalized recurrence, so large
    orders underflow to 0 instead of overflowing.
    """
    if K < 2:
        raise ValueError(f"truncation order K must be >= 2, got {K}")
    m = float(m)
    stream = _ScaledCoeffs(m)
    b = np.array([float(stream.next()) for _ in range(K + 1)])
    a = b * np.exp(-0.5 * special.gammaln(np.arange(K + 1) + 1.0))
    return HermiteCoefficients(m, K, a)


class _ScaledCoeffs:
    """Streams ``b_k(m) = a_k(m) sqrt(k!)`` using normalized Hermite polynomials."""

    def __init__(self, m):
        self.m = np.asarray(m, dtype=float)
        self.k = -1
        self.pref = SQRT_2_OVER_PI * np.exp(-0.5 * self.m * self.m)
        self.h_prev = None
        self.h = None

    def next(self):
        self.k += 1
        k, m = self.k, self.m
        if k == 0:
            return m * (2.0 * norm_cdf(m) - 1.0) + self.pref
        if k == 1:
            return 1.0 - 2.0 * norm_cdf(m)
        n = k - 2  # advance h_n = H_n / sqrt(n!)
        if n == 0:
            self.h_prev, self.h = np.zeros_like(m), np.ones_like(m)
        else:
            nxt = (m * self.h - math.sqrt(n - 1) * self.h_prev) / math.sqrt(n)
            self.h_prev, self.h = self.h, nxt
        return self.pref * self.h / math.sqrt(k * (k - 1.0))


def mehler_series(m1, m2, rho, tol: float = 1e-12):
    """Sum ``sum_k a_k(-m1) a_k(-m2) k! rho^k``; returns ``(value, K_used)``.

    Stops per element once the largest of the last four terms times
    ``|rho| / (1 - |rho|)`` is below ``tol``. With m1 = 0 every odd term is 0,
    and a zero of He_{k-2}(m2) kills one even term, so three consecutive
    terms can vanish. Two consecutive even terms cannot.
    """
    m1, m2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m1, m2, rho)))
    if np.any(np.abs(rho) >= 1):
        raise ValueError("the Mehler series needs |rho| < 1")
    s1, s2 = _ScaledCoeffs(-m1), _ScaledCoeffs(-m2)
    total = np.zeros(m1.shape)
    used = np.zeros(m1.shape, dtype=int)
    done = np.zeros(m1.shape, dtype=bool)
    arho = np.abs(rho)
    ratio = arho / (1.0 - arho)
    rho_k = np.ones(m1.shape)
    recent = np.zeros((3,) + m1.shape)
    for k in range(MAX_TERMS):
        term = s1.next() * s2.next() * rho_k
        term = np.where(done, 0.0, term)
        total += term
        used = np.where(done, used, k)
        if k >= 4:
            bound = np.maximum(np.abs(term), np.max(np.abs(recent), axis=0)) * ratio
            done |= bound < tol
            if done.all():
                break
        recent = np.roll(recent, 1, axis=0)
        recent[0] = term
        rho_k = rho_k * rho
    else:
        warnings.warn(f"Mehler series hit {MAX_TERMS} terms without reaching tol={tol}")
    return total, used


def _owens_t(h, a):
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    out = special.owens_t(h, np.where(np.isinf(a), 0.0, a))
    inf_val = np.sign(a) * 0.5 * norm_cdf(-np.abs(h))
    return np.where(np.isinf(a), inf_val, out)


def bvn_cdf(h, k, rho):
    """P(X < h, Y < k) for standard normals with correlation |rho| < 1 (Owen's T form)."""
    h, k, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, k, rho)))
    # near-subnormal arguments lose the ratios below; their effect is far below rounding
    h = np.where(np.abs(h) < 1e-280, 0.0, h)
    k = np.where(np.abs(k) < 1e-280, 0.0, k)
    s = np.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a_h = np.where(h == 0, np.sign(k - rho * h) * np.inf, (k - rho * h) / (h * s))
        a_k = np.where(k == 0, np.sign(h - rho * k) * np.inf, (h - rho * k) / (k * s))
    a_h = np.where((h == 0) & (k == 0), 0.0, a_h)
    a_k = np.where((h == 0) & (k == 0), 0.0, a_k)
    # signs, not h * k, which underflows to 0 for tiny arguments
    same = np.sign(h) * np.sign(k)
    beta = np.where((same > 0) | ((same == 0) & (h + k >= 0)), 0.0, 0.5)
    val = 0.5 * norm_cdf(h) + 0.5 * norm_cdf(k) - _owens_t(h, a_h) - _owens_t(k, a_k) - beta
    origin = 0.25 + np.arcsin(rho) / (2.0 * math.pi)
    return np.where((h == 0) & (k == 0), origin, val)


def _quadrant_moment(mu1, mu2, rho):
    """E[(X + mu1)(Y + mu2); X > -mu1, Y > -mu2] for |rho| < 1."""
    a, b = -mu1, -mu2
    s = np.sqrt((1.0 - rho) * (1.0 + rho))
    q = bvn_cdf(mu1, mu2, rho)
    beta = (b - rho * a) / s
    alpha = (a - rho * b) / s
    pa, pb = norm_pdf(a), norm_pdf(b)
    sf_beta, sf_alpha = norm_cdf(-beta), norm_cdf(-alpha)
    ex = pa * sf_beta + rho * pb * sf_alpha
    ey = pb * sf_alpha + rho * pa * sf_beta
    exy = pa * (rho * a * sf_beta + s * norm_pdf(beta)) + rho * (q + b * pb * sf_alpha)
    return exy + mu2 * ex + mu1 * ey + mu1 * mu2 * q


def _degenerate_abs_product(m1, c):
    """E|(Z + m1)(Z + c)| for a single standard normal Z."""
    lo = np.minimum(-m1, -c)
    hi = np.maximum(-m1, -c)
    b, d = m1 + c, m1 * c
    inner = ((norm_cdf(hi) - norm_cdf(lo)) * (1.0 + d)
             - (hi * norm_pdf(hi) - lo * norm_pdf(lo))
             - b * (norm_pdf(hi) - norm_pdf(lo)))
    return (1.0 + d) - 2.0 * inner


def abs_product_exact(m1, m2, rho):
    """Closed form of E|(Z1 + m1)(Z2 + m2)|, corr(Z1, Z2) = rho, any |rho| <= 1.

    Sums truncated bivariate-normal moments over the four sign quadrants.
    """
    m1, m2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m1, m2, rho)))
    # symmetric in (m1, m2): fix the order so swapping is exact in floating point
    m1, m2 = np.minimum(m1, m2), np.maximum(m1, m2)
    out = np.zeros(m1.shape)
    inner = np.abs(rho) < 1.0
    if np.any(inner):
        a, b, r = m1[inner], m2[inner], rho[inner]
        tot = 0.0
        for e1 in (1.0, -1.0):
            for e2 in (1.0, -1.0):
                tot = tot + _quadrant_moment(e1 * a, e2 * b, e1 * e2 * r)
        out[inner] = tot
    edge = ~inner
    if np.any(edge):
        c = np.where(rho[edge] > 0, m2[edge], -m2[edge])
        out[edge] = _degenerate_abs_product(m1[edge], c)
    return out


def mehler_cross_k(m1, m2, rho, tol: float = 1e-12):
    """Vectorized E|(Z1 + m1)(Z2 + m2)| and the series length used (0 = closed form)."""
    m1, m2, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m1, m2, rho)))
    if np.any(np.abs(rho) > 1.0) or np.any(np.isnan(rho)):
        raise ValueError("correlation must satisfy |rho| <= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    value = np.empty(m1.shape)
    K = np.zeros(m1.shape, dtype=int)
    use_series = np.abs(rho) <= SERIES_RHO_LIMIT
    if np.any(use_series):
        v, k = mehler_series(m1[use_series], m2[use_series], rho[use_series], tol)
        value[use_series] = v
        K[use_series] = k
    if np.any(~use_series):
        value[~use_series] = abs_product_exact(m1[~use_series], m2[~use_series], rho[~use_series])
    return value, K


def mehler_cross(m1, m2, rho, tol: float = 1e-12):
    """E|(Z1 + m1)(Z2 + m2)| for standard normals with correlation ``rho``.

    Mehler: ``sum_k a_k(-m1) a_k(-m2) k! rho^k``. The level-crossing factor
    ``A(m, rho)`` is ``mehler_cross(m, -m, rho)``.
    """
    value, _ = mehler_cross_k(m1, m2, rho, tol)
    return float(value) if value.ndim == 0 else value
