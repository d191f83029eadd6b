"""Numerical checks of the integrability condition, the small-lag lemmas and the curve condition.

Integrability of a positive function ``g`` at 0 is decided from samples on a
dyadic grid by fitting ``log g = c + alpha log tau + beta log|log tau|`` near
0. Power laws are separated by ``alpha``; in the borderline ``alpha = -1``
case the logarithmic exponent ``beta`` decides (``beta < -1`` integrable).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from ._numerics import gauss_legendre
from .covariance import CovarianceModel, LagOutOfRangeError
from .crossing_moments import DegenerateModelError, _check_regression, _regression_arrays
from .curves import CurveSpec, InvalidModulusError, empirical_modulus

VERDICTS = ("integrable", "non_integrable", "inconclusive")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class GemanReport:
    delta: float
    grid: np.ndarray
    L_values: np.ndarray
    local_exponent: float
    log_exponent: float
    verdict: str
    integral_estimate: float
    integral_stable: bool
    n_fit: int

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class LemmaReport:
    delta: float
    grid: np.ndarray
    lemma1_limit: Union[float, str]
    lemma1_reference: float
    lemma2_ratio_bound: float
    lemma2_rho_max: float
    lemma3_lower_margin: float
    lemma3_C_estimate: float

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class CurveReport:
    delta: float
    verdict: str
    integral_estimate: float
    local_exponent: float
    log_exponent: float
    gamma_source: str

    @property
    def satisfied(self) -> bool:
        return self.verdict == "satisfied"

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class ThetaReport:
    """Sampled checks of ``r = 1 + r''(0) tau^2/2 + theta`` with the limits on theta."""

    grid: np.ndarray
    theta_positive: bool
    theta_over_tau2: np.ndarray
    theta1_over_tau: np.ndarray
    theta2: np.ndarray
    limits_ok: bool

    def to_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


def default_delta(model: CovarianceModel) -> float:
    return min(1.0, model.delta_max / 4.0)


def dyadic_grid(delta: float, J: int = 40, tau_min: float = 1e-10) -> np.ndarray:
    grid = delta * 2.0 ** -np.arange(J + 1)
    return grid[grid >= tau_min]


def _fit_exponents(tau, g):
    """Least squares of log g on (1, log tau, log|log tau|); returns (alpha, beta)."""
    lt = np.log(tau)
    X = np.column_stack([np.ones_like(lt), lt, np.log(np.abs(lt))])
    coef, *_ = np.linalg.lstsq(X, np.log(g), rcond=None)
    return float(coef[1]), float(coef[2])


def exponent_verdict(alpha: float, beta: float, margin: float = 0.05) -> str:
    """Map fitted exponents to integrable / non_integrable / inconclusive."""
    if alpha > -1.0 + margin:
        return "integrable"
    if alpha < -1.0 - margin:
        return "non_integrable"
    if beta < -1.0 - margin:
        return "integrable"
    if beta >= -1.0 - margin / 2:
        return "non_integrable"
    return "inconclusive"


def _log_integral(fn_u, lo: float, hi: float, per_panel: int = 16) -> float:
    """int_lo^hi f(tau) dtau as int f(e^u) e^u du on dyadic panels of u."""
    if hi <= lo:
        return 0.0
    n = max(1, int(math.ceil(math.log2(hi / lo))))
    edges = np.linspace(math.log(lo), math.log(hi), n + 1)
    x, w = gauss_legendre(per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    u = a + (b - a) * x[None, :]
    vals = fn_u(u.ravel()).reshape(u.shape)
    return float(np.sum((b - a) * w[None, :] * vals))


def geman_function(model: CovarianceModel, tau):
    """L(tau) = (r''(tau) - r''(0)) / tau for 0 < tau <= delta_max."""
    model.check_lag(tau, allow_zero=False)
    out = model.geman(tau)
    return float(out) if np.ndim(out) == 0 else out


def _usable(model, tau, th2):
    ok = np.isfinite(th2) & (th2 > 0)
    if not getattr(model, "exact_theta2", False):
        # r''(tau) - r''(0) is pure rounding once it drops below this
        ok &= np.abs(th2) >= 1e-8 * abs(model.r2_0)
    return ok


def classify_geman(model: CovarianceModel, delta: Optional[float] = None, *,
                   J: Optional[int] = None, tau_min: Optional[float] = None,
                   margin: float = 0.05, n_fit: int = 24, fit_max: float = 0.5) -> GemanReport:
    """Decide whether L is integrable on (0, delta] from samples at delta 2^-j.

    Only points with ``tau <= fit_max`` whose ``theta''`` is resolved above
    rounding enter the fit, and of those the ``n_fit`` closest to 0.
    ``tau_min`` defaults to ``model.theta2_floor`` (1e-10 unless theta'' is
    exact) and ``J`` to the depth that reaches it.
    """
    if delta is None:
        delta = default_delta(model)
    if not (0 < delta <= model.delta_max):
        raise LagOutOfRangeError(f"delta={delta!r} outside (0, {model.delta_max}]")
    if tau_min is None:
        tau_min = float(getattr(model, "theta2_floor", 1e-10))
    if J is None:
        J = max(1, int(math.ceil(math.log2(delta / tau_min))))
    grid = dyadic_grid(delta, J, tau_min)
    th2 = np.asarray(model.theta2(grid), dtype=float)
    L = th2 / grid
    use = _usable(model, grid, th2) & (grid <= fit_max)
    idx = np.flatnonzero(use)[-n_fit:]
    if idx.size < 8:
        raise ValueError(f"only {idx.size} usable grid points for the exponent fit (need 8)")
    alpha, beta = _fit_exponents(grid[idx], L[idx])
    verdict = exponent_verdict(alpha, beta, margin)

    def integral(lo):
        return _log_integral(lambda u: np.asarray(model.theta2(np.exp(u)), dtype=float), lo, delta)

    full = integral(tau_min)
    half = integral(tau_min / 2)
    stable = bool(np.isfinite(full) and abs(half - full) <= 0.01 * abs(full))
    if verdict == "integrable" and not stable:
        verdict = "inconclusive"
    return GemanReport(float(delta), grid, L, alpha, beta, verdict, full, stable, int(idx.size))


def _lemma_grid(model, delta, J, tau_min):
    grid = dyadic_grid(delta, J, tau_min)
    reg = _regression_arrays(model, grid)
    _check_regression({k: (v[:1] if isinstance(v, np.ndarray) else v) for k, v in reg.items()})
    resolved = (reg["one_m_r2"] > 0) & (reg["sigma2"] > 1e4 * reg["err"])
    th2 = np.asarray(model.theta2(grid), dtype=float)
    resolved &= _usable(model, grid, th2)
    n = int(np.argmin(resolved)) if not resolved.all() else resolved.size
    if n < 4:
        raise DegenerateModelError("sigma^2 is not resolved above rounding on the lemma grid")
    sel = slice(0, n)
    return grid[sel], {k: (v[sel] if isinstance(v, np.ndarray) and v.shape == grid.shape else v)
                       for k, v in reg.items()}, th2[sel]


def _lemma1(grid, L, margin):
    ratio = L / grid
    tail = ratio[-8:]
    slope = np.polyfit(np.log(grid[-8:]), np.log(tail), 1)[0]
    growing = bool(np.all(np.diff(tail) > 0)) and tail[-1] > 1.05 * tail[0]
    if slope < -margin or growing:
        return "diverging"
    # even expansion L/tau = c0 + c1 tau^2: Richardson on the last two dyadic points
    return float((4.0 * ratio[-1] - ratio[-2]) / 3.0)


def lemma_report(model: CovarianceModel, delta: Optional[float] = None, *, J: int = 40,
                 tau_min: float = 1e-10, margin: float = 0.05) -> LemmaReport:
    """Lemma quantities on the dyadic grid of (0, delta] where sigma^2 is resolved."""
    if delta is None:
        delta = default_delta(model)
    model.check_lag(delta, allow_zero=False)
    grid, reg, th2 = _lemma_grid(model, delta, J, tau_min)
    L = th2 / grid
    sigma2 = reg["sigma2"]
    ratio = np.abs(reg["r1"]) / np.sqrt(sigma2)
    lower = L * grid / sigma2
    r4 = model.r4_0
    return LemmaReport(
        delta=float(delta), grid=grid,
        lemma1_limit=_lemma1(grid, L, margin),
        lemma1_reference=float(r4 / 2.0) if np.isfinite(r4) else math.inf,
        lemma2_ratio_bound=float(np.max(ratio)),
        lemma2_rho_max=float(np.max(reg["rho"])),
        lemma3_lower_margin=float(np.min(lower)),
        lemma3_C_estimate=float(max(0.0, np.max(lower) - 2.0)),
    )


def theta_checks(model: CovarianceModel, delta: Optional[float] = None, J: int = 20,
                 limit_tol: float = 1e-3) -> ThetaReport:
    """theta > 0 and theta/tau^2, theta'/tau, theta'' decreasing below ``limit_tol`` by j = J."""
    if delta is None:
        delta = default_delta(model)
    grid = dyadic_grid(delta, J, 0.0)
    th = np.asarray(model.theta(grid), dtype=float)
    th1 = np.asarray(model.theta1(grid), dtype=float)
    th2 = np.asarray(model.theta2(grid), dtype=float)
    seqs = [th / grid ** 2, th1 / grid, th2]
    ok = all(abs(s[-1]) < limit_tol and np.all(np.diff(np.abs(s)) <= 1e-12 * np.abs(s[:-1]) + 1e-300)
             for s in seqs)
    return ThetaReport(grid, bool(np.all(th > 0)), seqs[0], seqs[1], seqs[2], bool(ok))


def curve_condition(curve: CurveSpec, delta: float, *, margin: float = 0.05, J: int = 40,
                    s_min: float = 1e-10, n_points: int = 4096) -> CurveReport:
    """Decide whether int_0^delta gamma(s)/s ds is finite.

    Verdict: ``satisfied``, ``violated`` or ``inconclusive``. A violated
    condition only removes the hypothesis; it does not imply infinite variance.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if curve.gamma is not None:
        s = dyadic_grid(delta, J, s_min)[::-1]
        g = np.asarray(curve.gamma(s), dtype=float)
        source = "supplied"
    else:
        s, g = empirical_modulus(curve.psi_dot, delta, n_points)
        source = "empirical"
    if np.any(np.diff(g) < -1e-12 * np.maximum(1.0, np.abs(g[1:]))) or np.any(g < 0):
        raise InvalidModulusError("modulus of continuity must be nonnegative and nondecreasing")
    if np.all(g <= 0):
        return CurveReport(float(delta), "satisfied", 0.0, math.inf, 0.0, source)
    pos = g > 0
    if pos.sum() < 8:
        raise ValueError("too few positive modulus samples for the exponent fit")
    ss, gg = s[pos][:24], g[pos][:24]
    alpha, beta = _fit_exponents(ss, gg / ss)
    verdict = {"integrable": "satisfied", "non_integrable": "violated",
               "inconclusive": "inconclusive"}[exponent_verdict(alpha, beta, margin)]
    if curve.gamma is not None:
        integral = _log_integral(lambda u: np.asarray(curve.gamma(np.exp(u)), dtype=float),
                                 s_min, delta)
    else:
        # trapezoid in log s; below the sampled range assume the fitted law
        integral = float(np.trapezoid(g, np.log(s))) + float(g[0])
    return CurveReport(float(delta), verdict, integral, alpha, beta, source)


__all__ = ["GemanReport", "LemmaReport", "CurveReport", "ThetaReport", "CurveSpec",
           "geman_function", "classify_geman", "lemma_report", "curve_condition",
           "theta_checks", "exponent_verdict", "dyadic_grid", "VERDICTS"]
