"""First and second factorial moments of level / curve crossing counts.

The second factorial moment of the number of crossings of the level ``x`` on
``[0, t]`` is

    M2 = 2 int_0^t (t - tau) p_tau(x, x) sigma^2(tau) A(m(tau), rho(tau)) dtau

where ``(sigma^2, rho, m)`` come from regressing the derivatives at 0 and tau
on the values there, and ``A`` is evaluated by the Mehler series. Near
``tau = 0`` the integrand is handled on a geometrically graded mesh.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize

from . import hermite
from .covariance import CovarianceModel
from .curves import CurveSpec, constant_curve
from .hermite import HermiteCoefficients, hermite_coeffs, mehler_cross  # noqa: F401 (re-export)
from .quadrature import adaptive_gk15

EPS = np.finfo(float).eps


class SingularLagError(ValueError):
    """1 - r(tau)^2 = 0: (X_0, X_tau) has no density."""


class DegenerateModelError(ValueError):
    """sigma^2(tau) vanishes: the derivative is a function of the two values."""


class InfiniteMomentError(ValueError):
    pass


class CurveConditionError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionCoefficients:
    tau: float
    sigma2: float
    rho: float
    alpha1: float
    alpha2: float
    m: float

    @property
    def beta1(self) -> float:
        return self.alpha2

    @property
    def beta2(self) -> float:
        return self.alpha1


@dataclass
class MomentResult:
    t: float
    target: Union[float, str]
    rice_mean: float
    m2: float
    variance: float
    quad_error: float
    series_K: int
    finite: bool
    m2_delta: float = math.nan
    delta: float = math.nan
    tau_floor: float = math.nan
    tail_estimate: float = 0.0
    excluded_lags: list = field(default_factory=list)
    geman_verdict: str = "unchecked"

    def to_dict(self) -> dict:
        return asdict(self)


def rice_mean(model: CovarianceModel, x: float, t: float) -> float:
    """Expected number of crossings of level ``x`` on ``[0, t]``."""
    if t < 0:
        raise ValueError("horizon t must be >= 0")
    lam2 = -model.r2_0
    if not (np.isfinite(lam2) and lam2 > 0):
        raise ValueError("model needs a finite, positive second spectral moment")
    return t * math.exp(-0.5 * x * x) * math.sqrt(lam2) / math.pi


def _omr_abs_error(model, tau, omr, lam2):
    """Absolute rounding error of ``model.one_minus_r``.

    Up to the first zero of r' the value is accumulated from a single-signed
    integrand, so the error is relative; afterwards it is bounded by the
    total variation ``tau * sqrt(lambda2)``.
    """
    first = model.first_stationary_lag
    beyond = np.where(tau > first, EPS * (1.0 + tau * math.sqrt(lam2)), 0.0)
    return EPS * np.abs(omr) + beyond


def _regression_arrays(model: CovarianceModel, tau, sigma2_scale: float = 1.0):
    tau = np.asarray(tau, dtype=float)
    jet = model.jet(tau)
    r, r1, r2 = jet.d0, jet.d1, jet.d2
    lam2 = -model.r2_0
    omr = model.one_minus_r(tau)
    opr = 1.0 + r
    one_m_r2 = omr * opr
    with np.errstate(divide="ignore", invalid="ignore"):
        q = r1 * r1 / one_m_r2
        sigma2 = (lam2 - q) * sigma2_scale
        cov = (-r2 - r * q) * sigma2_scale
        rho = cov / sigma2
        alpha1 = r1 * r / one_m_r2
        alpha2 = -r1 / one_m_r2
        # rounding scale of sigma^2: 1 + r loses digits near r = -1, and 1 - r
        # loses them once r has come back towards 1 after a dip
        omr_rel = _omr_abs_error(model, tau, omr, lam2) / np.abs(omr)
        err = 64.0 * EPS * ((lam2 + np.abs(q)) * (1.0 + 1.0 / np.abs(opr))
                            + np.abs(q) * omr_rel / EPS)
    return dict(tau=tau, r=r, r1=r1, r2=r2, omr=omr, opr=opr, one_m_r2=one_m_r2,
                sigma2=sigma2, rho=rho, alpha1=alpha1, alpha2=alpha2, err=err)


def _check_regression(reg, where="tau"):
    bad = ~(reg["one_m_r2"] > 0)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise SingularLagError(f"1 - r^2 = 0 at {where}={reg['tau'].ravel()[i]:g}")
    deg = ~(reg["sigma2"] > reg["err"])
    if np.any(deg):
        i = np.flatnonzero(deg.ravel())[0]
        raise DegenerateModelError(
            f"sigma^2 = {reg['sigma2'].ravel()[i]:.3g} is zero to rounding at "
            f"{where}={reg['tau'].ravel()[i]:g} (process is perfectly predictable)")


def regression_at(model: CovarianceModel, tau: float, x: float = 0.0,
                  sigma2_scale: float = 1.0) -> RegressionCoefficients:
    """Residual variance/correlation and weights of the derivative regression at lag tau."""
    model.check_lag(tau, allow_zero=False)
    reg = _regression_arrays(model, float(tau), sigma2_scale)
    _check_regression(reg)
    sigma = math.sqrt(float(reg["sigma2"]))
    m = float(reg["r1"]) * x / (float(reg["opr"]) * sigma)
    rho = float(np.clip(reg["rho"], -1.0, 1.0))
    return RegressionCoefficients(float(tau), float(reg["sigma2"]), rho,
                                  float(reg["alpha1"]), float(reg["alpha2"]), m)


def bivariate_density(model: CovarianceModel, tau: float, x: float) -> float:
    """Density of (X_0, X_tau) at (x, x)."""
    model.check_lag(tau, allow_zero=False)
    omr = float(model.one_minus_r(tau))
    r = 1.0 - omr
    one_m_r2 = omr * (1.0 + r)
    if not one_m_r2 > 0:
        raise SingularLagError(f"1 - r^2 = 0 at tau={tau:g}")
    return math.exp(-x * x / (1.0 + r)) / (2.0 * math.pi * math.sqrt(one_m_r2))


def _pair_density(reg, psi1, psi2):
    d = psi2 - psi1
    opr, omr = reg["opr"], reg["omr"]
    quad = (psi1 * psi1 + psi2 * psi2) / opr + reg["r"] * d * d / reg["one_m_r2"]
    return np.exp(-0.5 * quad) / (2.0 * math.pi * np.sqrt(reg["one_m_r2"]))


class _Kernel:
    """tau -> inner integrand, with bookkeeping of series lengths."""

    def __init__(self, model, t, curve: CurveSpec, series_tol, sigma2_scale, n_inner):
        self.model, self.t, self.curve = model, t, curve
        self.tol, self.scale, self.n_inner = series_tol, sigma2_scale, n_inner
        self.max_K = 0
        self.inner_err = 0.0

    def _conditional(self, reg, t1, tau):
        # E|Xdot_1 - psidot_1||Xdot_2 - psidot_2| given the values, times the density
        c = self.curve
        psi1, psi2 = c.psi(t1), c.psi(t1 + tau)
        d1, d2 = c.psi_dot(t1), c.psi_dot(t1 + tau)
        sigma = np.sqrt(reg["sigma2"])
        r1, opr, one_m_r2 = reg["r1"], reg["opr"], reg["one_m_r2"]
        # alpha1 psi1 + alpha2 psi2 = -r1 psi1/(1+r) - r1 (psi2 - psi1)/(1 - r^2)
        drift1 = -r1 * psi1 / opr - r1 * (psi2 - psi1) / one_m_r2
        # -alpha2 psi1 - alpha1 psi2 = r1 psi2/(1+r) - r1 (psi2 - psi1)/(1 - r^2)
        drift2 = r1 * psi2 / opr - r1 * (psi2 - psi1) / one_m_r2
        m1 = (drift1 - d1) / sigma
        m2 = (drift2 - d2) / sigma
        rho = np.clip(reg["rho"], -1.0, 1.0)
        a, K = hermite.mehler_cross_k(m1, m2, rho, self.tol)
        if K.size:
            self.max_K = max(self.max_K, int(K.max()))
        return _pair_density(reg, psi1, psi2) * reg["sigma2"] * a

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        reg = _regression_arrays(self.model, tau, self.scale)
        _check_regression(reg)
        if self.curve.constant is not None:
            val = self._conditional(reg, np.zeros_like(tau), tau)
            return 2.0 * (self.t - tau) * val
        # inner t1-integral over [0, t - tau] by Gauss-Legendre (n and n/2 for an error scale)
        total = np.zeros_like(tau)
        coarse = np.zeros_like(tau)
        for n, acc in ((self.n_inner, total), (self.n_inner // 2, coarse)):
            x, w = np.polynomial.legendre.leggauss(n)
            span = self.t - tau
            t1 = 0.5 * span[:, None] * (x[None, :] + 1.0)
            regb = {k: (v[:, None] if isinstance(v, np.ndarray) and v.shape == tau.shape else v)
                    for k, v in reg.items()}
            vals = self._conditional(regb, t1, tau[:, None])
            acc += 0.5 * span * (vals @ w)
        self._last_inner_diff = np.abs(total - coarse)
        return 2.0 * total


def pair_integrand(model: CovarianceModel, curve: CurveSpec, t1, tau, series_tol: float = 1e-12):
    """p(psi_t1, psi_t1+tau) E[|X'_t1 - psi'_t1| |X'_t1+tau - psi'_t1+tau| | X = psi at both].

    The inner integrand of the curve second factorial moment, at lag ``tau > 0``.
    """
    tau = np.asarray(tau, dtype=float)
    t1 = np.broadcast_to(np.asarray(t1, dtype=float), tau.shape)
    model.check_lag(tau, allow_zero=False)
    reg = _regression_arrays(model, tau)
    _check_regression(reg)
    kern = _Kernel(model, math.inf, curve, series_tol, 1.0, 0)
    out = kern._conditional(reg, t1, tau)
    return float(out) if out.ndim == 0 else out


def _geman_gate(model, margin):
    from .diagnostics import classify_geman
    try:
        return classify_geman(model, min(1.0, model.delta_max / 4.0), margin=margin).verdict
    except ValueError:
        return "inconclusive"


def _resolved(model, tau, sigma2_scale=1.0):
    reg = _regression_arrays(model, np.atleast_1d(np.asarray(tau, dtype=float)), sigma2_scale)
    return (reg["one_m_r2"] > 0) & (reg["sigma2"] > 1e4 * reg["err"])


def _singular_windows(model, lo, hi, guard, sigma2_scale=1.0, n=4001):
    """Intervals around interior near-singular lags where the regression is unresolved.

    Candidates are local minima of 1 - r^2 below 1e-4 on a grid; each is
    located precisely and excluded with radius ``guard``, doubled until
    sigma^2 is resolved at both edges.
    """
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, n)
    v = model.one_minus_r(grid) * (1.0 + model.r(grid))
    out = []
    for i in range(1, n - 1):
        if not (v[i] <= v[i - 1] and v[i] <= v[i + 1] and v[i] < 1e-4):
            continue
        f = lambda s: float(model.one_minus_r(s) * (1.0 + model.r(s)))
        res = optimize.minimize_scalar(f, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                       options={"xatol": 1e-13})
        c = float(res.x)
        if _resolved(model, c, sigma2_scale)[0]:
            continue
        rad = guard
        while rad < hi - lo:
            edges = np.array([c - rad, c + rad])
            edges = edges[(edges > lo) & (edges < hi)]
            if edges.size == 0 or np.all(_resolved(model, edges, sigma2_scale)):
                break
            rad *= 2.0
        out.append((c, max(lo, c - rad), min(hi, c + rad)))
    return out


def _floor(model, delta, tau_min, sigma2_scale):
    """Smallest dyadic lag delta 2^-j >= tau_min where sigma^2 is resolved to 1e-4."""
    j = np.arange(0, 200)
    taus = delta * 2.0 ** -j
    taus = taus[taus >= tau_min]
    reg = _regression_arrays(model, taus, sigma2_scale)
    ok = (reg["one_m_r2"] > 0) & (reg["sigma2"] > 1e4 * reg["err"])
    if not ok[0]:
        _check_regression({k: (v[:1] if isinstance(v, np.ndarray) else v) for k, v in reg.items()})
    n_ok = int(np.argmin(ok)) if not ok.all() else ok.size
    return taus[max(n_ok - 1, 0)]


def _moment(model: CovarianceModel, curve: CurveSpec, t: float, delta: Optional[float],
            tau_min: float, quad_tol: float, series_tol: float, refine: int, guard: float,
            sigma2_scale: float, n_inner: int, target):
    if t < 0:
        raise ValueError("horizon t must be >= 0")
    x_level = curve.constant if curve.constant is not None else None
    if x_level is not None:
        mean = rice_mean(model, x_level, t)
    else:
        mean = _curve_mean(model, curve, t)
    if t == 0:
        return MomentResult(t, target, mean, 0.0, mean - mean * mean, 0.0, 0, True, 0.0)
    if delta is None:
        delta = min(1.0, model.delta_max / 4.0)
    delta = min(delta, t)
    model.check_lag(t, allow_zero=False)
    kern = _Kernel(model, t, curve, series_tol, sigma2_scale, n_inner)

    floor = _floor(model, delta, tau_min, sigma2_scale)
    # near-zero block in u = log(tau), dyadic starting panels
    n_dyadic = max(1, int(round(math.log2(delta / floor))))
    u_edges = math.log(delta) - math.log(2.0) * np.arange(n_dyadic, -1, -1)

    inner_err = [0.0]

    def g_log(u):
        tau = np.exp(u)
        out = tau * kern(tau)
        if curve.constant is None:
            inner_err[0] = max(inner_err[0], float(np.max(tau * kern._last_inner_diff)))
        return out

    tol_abs = quad_tol
    near = adaptive_gk15(g_log, u_edges, tol_abs=tol_abs / 2, tol_rel=quad_tol, refine=refine)
    # geometric tail on (0, floor) from the two lowest dyadic panels
    d1 = _panel_sum(near, u_edges[0], u_edges[1])
    d2 = _panel_sum(near, u_edges[1], u_edges[2]) if n_dyadic >= 2 else 0.0
    if d2 > 0 and 0 <= d1 / d2 < 1:
        q = d1 / d2
        tail = d1 * q / (1.0 - q)
    else:
        tail = abs(d1)
    m2_delta = near.value + tail
    err = near.error + abs(tail)

    excluded = []
    far_value = 0.0
    if t > delta:
        windows = _singular_windows(model, delta, t, guard, sigma2_scale)
        edges = [delta]
        for c, a, b in windows:
            edges += [a, b]
            excluded.append(c)
        edges.append(t)
        for a, b in zip(edges[0::2], edges[1::2]):
            if b <= a:
                continue
            n0 = max(4, int(math.ceil((b - a) / 0.25)))
            res = adaptive_gk15(kern, np.linspace(a, b, n0 + 1), tol_abs=tol_abs / 2,
                                tol_rel=quad_tol, refine=refine)
            far_value += res.value
            err += res.error
        for c, a, b in windows:
            # the integrand vanishes at the singular lag; bound the gap by its edge values
            probe = np.array([x for x in (a, b) if delta < x < t] or [c])
            edge_vals = np.abs(kern(probe)) if probe.size and probe[0] != c else np.zeros(1)
            err += (b - a) * float(np.max(edge_vals))
    m2 = m2_delta + far_value
    err += inner_err[0] * (t + 1.0) if curve.constant is None else 0.0
    var = m2 + mean - mean * mean
    return MomentResult(t, target, mean, m2, var, err, kern.max_K, True, m2_delta, delta,
                        float(floor), tail, excluded)


def _panel_sum(res, a, b):
    p = res.panels
    sel = (p[:, 0] >= a - 1e-12) & (p[:, 1] <= b + 1e-12)
    return float(np.sum(res.contributions[sel]))


def _curve_mean(model, curve, t, n=64):
    """E N_t(psi) = int_0^t phi(psi) E|X' - psi'| ds with X' ~ N(0, lambda2) independent of X."""
    if t == 0:
        return 0.0
    lam = math.sqrt(-model.r2_0)
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * t * (x + 1.0)
    psi, dpsi = curve.psi(s), curve.psi_dot(s)
    mcoef = hermite.hermite_coeffs  # a0(m) = E|Z - m|
    a0 = np.array([mcoef(v, 2).a[0] for v in dpsi / lam])
    dens = np.exp(-0.5 * psi * psi) / math.sqrt(2 * math.pi)
    return float(0.5 * t * np.sum(w * dens * lam * a0))


def second_factorial_moment(model: CovarianceModel, x: float, t: float,
                            delta: Optional[float] = None, *, tau_min: float = 1e-8,
                            quad_tol: float = 1e-9, series_tol: float = 1e-12,
                            margin: float = 0.05, refine: int = 0, guard: float = 1e-6,
                            check_geman: bool = True, sigma2_scale: float = 1.0) -> MomentResult:
    """E[N(N-1)] for crossings of level ``x`` on ``[0, t]``.

    ``delta`` splits the graded near-zero block from the regular block
    (default ``min(1, delta_max/4)``). If the Geman classifier says the model is
    non-integrable, no quadrature is attempted: ``finite=False`` and
    ``m2 = inf``. ``sigma2_scale`` multiplies sigma^2 and is a test hook only.
    """
    verdict = _geman_gate(model, margin) if check_geman else "unchecked"
    if verdict == "non_integrable":
        mean = rice_mean(model, x, t)
        return MomentResult(t, float(x), mean, math.inf, math.inf, math.nan, 0, False,
                            geman_verdict=verdict)
    res = _moment(model, constant_curve(x), t, delta, tau_min, quad_tol, series_tol, refine,
                  guard, sigma2_scale, 0, float(x))
    res.geman_verdict = verdict
    return res


def variance_of_count(result: MomentResult) -> float:
    """Var N = M2 + E N - (E N)^2."""
    if not result.finite or not math.isfinite(result.m2):
        raise InfiniteMomentError("second factorial moment is infinite; the variance does not exist")
    return result.m2 + result.rice_mean - result.rice_mean ** 2


def curve_second_moment(model: CovarianceModel, curve: CurveSpec, t: float,
                        delta: Optional[float] = None, *, tau_min: float = 1e-8,
                        quad_tol: float = 1e-8, series_tol: float = 1e-12, margin: float = 0.05,
                        refine: int = 0, guard: float = 1e-6, n_inner: int = 24,
                        check_geman: bool = True, check_curve: bool = True,
                        sigma2_scale: float = 1.0) -> MomentResult:
    """E[N(N-1)] for crossings of the curve ``psi`` on ``[0, t]``.

    Integrates over ``(t1, tau)`` with ``tau`` outermost; the inner ``t1``
    integral uses Gauss-Legendre. ``rice_mean`` in the result holds the
    curve-crossing mean.
    """
    from .diagnostics import curve_condition

    if check_curve and curve.constant is None:
        cc = curve_condition(curve, min(1.0, max(t, 1e-3)), margin=margin)
        if cc.verdict == "violated":
            raise CurveConditionError(
                "curve condition fails: int_0^delta gamma(s)/s ds appears infinite, so the "
                "hypothesis on psi' is not met; refusing to compute")
    target = curve.constant if curve.constant is not None else curve.name
    verdict = _geman_gate(model, margin) if check_geman else "unchecked"
    if verdict == "non_integrable":
        return MomentResult(t, target, _curve_mean(model, curve, t), math.inf, math.inf,
                            math.nan, 0, False, geman_verdict=verdict)
    res = _moment(model, curve, t, delta, tau_min, quad_tol, series_tol, refine, guard,
                  sigma2_scale, n_inner, target)
    res.geman_verdict = verdict
    return res
