"""Stationary correlation functions r(tau) with derivatives up to order four.

Every model exposes :meth:`CovarianceModel.jet`, returning a
:class:`~crossings.jets.TaylorJet4` with ``(r, r', r'', r''', r'''')`` at the
requested lags. Expression models propagate jets through the parsed AST, so the
derivatives are exact up to rounding, including at ``tau = 0``.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate, special

from . import expression as ex
from ._numerics import integrate_from_zero
from .jets import TaylorJet4

__all__ = [
    "CovarianceModel", "ExpressionModel", "DyadicMixtureModel", "SyntheticModel",
    "SpectralModel", "CovarianceValidationError", "LagOutOfRangeError",
    "NotSimulableError", "parse_covariance", "derivatives_at", "theta_at",
    "gaussian", "cosine", "matern32", "matern52", "dyadic", "synthetic",
]


class CovarianceValidationError(ValueError):
    """A model broke one of the correlation-function invariants."""

    def __init__(self, invariant: str, measured: float, detail: str = ""):
        self.invariant = invariant
        self.measured = measured
        msg = f"invariant {invariant} violated (measured {measured!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class LagOutOfRangeError(ValueError):
    pass


class NotSimulableError(ValueError):
    pass


class CovarianceModel:
    """Base class. Subclasses implement ``_jet(tau_array)``."""

    name: str = "model"
    delta_max: float = math.inf
    validation_eps: float = 1e-9
    simulable: bool = True
    #: True when ``theta2`` is computed without cancellation against r''(0)
    exact_theta2: bool = False
    #: smallest lag at which theta2 is worth sampling for the exponent fit
    theta2_floor: float = 1e-10

    # -- raw evaluation --------------------------------------------------------
    def _jet(self, tau: np.ndarray) -> TaylorJet4:
        raise NotImplementedError

    def jet(self, tau) -> TaylorJet4:
        tau = np.asarray(tau, dtype=float)
        return self._jet(tau)

    def r(self, tau):
        return self.jet(tau).d0

    def covariance_sequence(self, dt: float, count: int) -> np.ndarray:
        """``r(k dt)`` for ``k = 0..count-1`` (used by the path simulator)."""
        return self.r(dt * np.arange(count))

    @cached_property
    def jet0(self) -> TaylorJet4:
        return self.jet(0.0)

    @property
    def r2_0(self) -> float:
        """r''(0); minus the second spectral moment."""
        return float(self.jet0.d2)

    @property
    def lambda2(self) -> float:
        return -self.r2_0

    @property
    def r4_0(self) -> float:
        """r''''(0) of the even extension of r.

        A nonzero one-sided r'''(0) means a |tau|^3 term, hence an infinite
        fourth spectral moment.
        """
        j0 = self.jet0
        if not abs(float(j0.d3)) <= self.validation_eps:
            return math.inf
        return float(j0.d4)

    # -- cancellation-aware quantities -------------------------------------
    def theta2(self, tau):
        """theta''(tau) = r''(tau) - r''(0)."""
        return self.jet(tau).d2 - self.r2_0

    def geman(self, tau):
        """Geman function L(tau) = (r''(tau) - r''(0)) / tau."""
        tau = np.asarray(tau, dtype=float)
        return self.theta2(tau) / tau

    def theta(self, tau):
        """theta(tau) = r(tau) - 1 - r''(0) tau^2 / 2, integrated from theta''."""
        tau = np.asarray(tau, dtype=float)
        out = integrate_from_zero(self.theta2, tau.ravel(), kernel=lambda s, t: t - s)
        return out.reshape(tau.shape)

    def theta1(self, tau):
        """theta'(tau) = r'(tau) - r''(0) tau."""
        tau = np.asarray(tau, dtype=float)
        return integrate_from_zero(self.theta2, tau.ravel()).reshape(tau.shape)

    def one_minus_r(self, tau):
        """1 - r(tau) without the cancellation of the direct difference near 0."""
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        direct = 1.0 - self.r(flat)
        small = direct < 1e-2
        out = direct.copy()
        if np.any(small):
            out[small] = integrate_from_zero(lambda s: -self.jet(s).d1, flat[small])
        return out.reshape(tau.shape)

    @cached_property
    def first_stationary_lag(self) -> float:
        """First lag where r' changes sign (inf if none up to min(delta_max, 100))."""
        hi = min(self.delta_max, 100.0)
        grid = np.linspace(0.0, hi, 8193)[1:]
        d1 = self.jet(grid).d1
        up = np.flatnonzero(d1 >= 0)
        return float(grid[up[0]]) if up.size else math.inf

    # -- validation ----------------------------------------------------------
    def validation_grid(self, n: int = 257) -> np.ndarray:
        hi = min(self.delta_max, 50.0)
        return np.linspace(0.0, hi, n)[1:]

    def validate(self) -> "CovarianceModel":
        eps = self.validation_eps
        j0 = self.jet0
        r0, r1, r2 = float(j0.d0), float(j0.d1), float(j0.d2)
        if not abs(r0 - 1.0) <= eps:
            raise CovarianceValidationError("r(0) = 1", r0)
        if not abs(r1) <= eps:
            raise CovarianceValidationError("r'(0) = 0", r1)
        if not (np.isfinite(r2) and r2 < 0):
            raise CovarianceValidationError(
                "r''(0) < 0", r2, "the second spectral moment must be finite and positive")
        grid = self.validation_grid()
        vals = self.r(grid)
        bad = ~(np.abs(vals) <= 1.0 + eps)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CovarianceValidationError("|r(tau)| <= 1", float(vals[i]), f"at tau={grid[i]:g}")
        return self

    def check_lag(self, tau, allow_zero=True):
        t = np.asarray(tau, dtype=float)
        lo_ok = (t >= 0) if allow_zero else (t > 0)
        if not np.all(lo_ok & (t <= self.delta_max)):
            raise LagOutOfRangeError(
                f"lag {tau!r} outside {'[' if allow_zero else '('}0, {self.delta_max}]")

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True, eq=False)
class ExpressionModel(CovarianceModel):
    """Correlation given by an expression AST in ``tau`` (builtins use this too)."""

    ast: ex.Node
    delta_max: float = math.inf
    validation_eps: float = 1e-9
    name: str = "expression"
    params: dict = field(default_factory=dict)

    def _jet(self, tau):
        return ex.evaluate_jet(self.ast, "tau", tau)

    def r(self, tau):
        return np.asarray(ex.evaluate_numpy(self.ast, tau=np.asarray(tau, dtype=float)),
                          dtype=float) + np.zeros_like(np.asarray(tau, dtype=float))

    def describe(self):
        d = {"name": self.name, "expression": ex.to_string(self.ast)}
        if self.params:
            d["params"] = dict(self.params)
        return d


def _builtin_ast(text: str) -> ex.Node:
    return ex.parse(text)


def gaussian(scale: float = 1.0, delta_max: float = math.inf) -> ExpressionModel:
    """exp(-tau^2 / (2 scale^2))."""
    s = float(scale)
    ast = _builtin_ast(f"exp(-tau^2/(2*{s!r}^2))")
    return ExpressionModel(ast, delta_max, name="gaussian", params={"scale": s}).validate()


def cosine(freq: float = 1.0, delta_max: float = math.inf) -> ExpressionModel:
    f = float(freq)
    ast = _builtin_ast(f"cos({f!r}*tau)")
    return ExpressionModel(ast, delta_max, name="cosine", params={"freq": f}).validate()


def matern32(scale: float = 1.0, delta_max: float = math.inf) -> ExpressionModel:
    """Matern-3/2 on tau >= 0: r'''(0+) != 0, so r''''(0) is infinite while L stays bounded."""
    a = math.sqrt(3.0) / float(scale)
    ast = _builtin_ast(f"(1 + {a!r}*tau)*exp(-{a!r}*tau)")
    return ExpressionModel(ast, delta_max, name="matern32", params={"scale": float(scale)}).validate()


def matern52(scale: float = 1.0, delta_max: float = math.inf) -> ExpressionModel:
    a = math.sqrt(5.0) / float(scale)
    ast = _builtin_ast(f"(1 + {a!r}*tau + {a * a / 3.0!r}*tau^2)*exp(-{a!r}*tau)")
    return ExpressionModel(ast, delta_max, name="matern52", params={"scale": float(scale)}).validate()


@dataclass(frozen=True, eq=False)
class DyadicMixtureModel(CovarianceModel):
    """Mixture of Gaussian correlations at dyadic scales.

    ``r(tau) = sum_j w_j exp(-(2^j tau)^2 / 2)`` with ``w_j 4^j`` proportional to
    ``j^-p``. The second spectral moment is finite for ``p > 1``; the Geman
    function is integrable iff ``p > 2``, since ``tau L(tau)`` behaves like the
    tail ``sum_{2^j > 1/tau} j^-p``. The spectral density is the matching
    mixture of normal densities with standard deviations ``2^j`` (tail
    ``~ lambda^-3 (log lambda)^-p``), so the model is positive definite.
    """

    p: float = 1.5
    delta_max: float = math.inf
    validation_eps: float = 1e-9
    name: str = "dyadic"
    exact_theta2 = True

    _J_MAX = 160
    _U_CUT = 40.0

    @cached_property
    def _norm(self) -> float:
        j = np.arange(1, 80, dtype=float)
        return float(np.sum(4.0 ** -j * j ** -self.p))

    @property
    def r2_0(self) -> float:
        return -float(special.zeta(self.p, 1)) / self._norm

    def _components(self, tau):
        tau = np.asarray(tau, dtype=float)
        tmin = np.min(tau[tau > 0]) if np.any(tau > 0) else 1.0
        jmax = int(min(self._J_MAX, max(1, math.ceil(math.log2(self._U_CUT / tmin)))))
        j = np.arange(1, jmax + 1, dtype=float)
        a = 4.0 ** j
        c = j ** -self.p / self._norm  # = w_j * a_j
        shape = tau.shape + (1,)
        u2 = a * tau.reshape(shape) ** 2
        g = np.exp(-0.5 * u2)
        return tau.reshape(shape), a, c, u2, g

    def _jet(self, tau):
        tau = np.asarray(tau, dtype=float)
        t, a, c, u2, g = self._components(tau)
        with np.errstate(over="ignore", invalid="ignore"):
            d0 = np.sum(c / a * g, axis=-1)
            d1 = np.sum(-c * t * g, axis=-1)
            d2 = np.sum(c * (u2 - 1.0) * g, axis=-1)
            d3 = np.sum(c * a * t * (3.0 - u2) * g, axis=-1)
            d4 = np.sum(np.where(g > 0, c * a * (u2 * u2 - 6.0 * u2 + 3.0) * g, 0.0), axis=-1)
        zero = tau == 0
        d0 = np.where(zero, 1.0, d0)
        d1 = np.where(zero, 0.0, d1)
        d2 = np.where(zero, self.r2_0, d2)
        d3 = np.where(zero, 0.0, d3)
        d4 = np.where(zero, np.inf, d4)
        return TaylorJet4.from_derivatives([d0, d1, d2, d3, d4])

    def theta2(self, tau):
        tau = np.asarray(tau, dtype=float)
        t, a, c, u2, g = self._components(tau)
        # tail components (2^j tau beyond the cut) contribute c_j each
        h = -np.expm1(-0.5 * u2) + u2 * g
        inside = np.sum(c * h, axis=-1)
        jmax = a.size
        tail = float(special.zeta(self.p, jmax + 1)) / self._norm
        out = inside + tail
        return np.where(tau == 0, 0.0, out)

    def one_minus_r(self, tau):
        tau = np.asarray(tau, dtype=float)
        t, a, c, u2, g = self._components(tau)
        inside = np.sum(c / a * -np.expm1(-0.5 * u2), axis=-1)
        j = np.arange(a.size + 1, a.size + 60, dtype=float)
        tail = float(np.sum(4.0 ** -j * j ** -self.p)) / self._norm
        return np.where(tau == 0, 0.0, inside + tail)

    def spectral_density(self, lam):
        """Two-sided spectral density f with r(tau) = int f(l) cos(l tau) dl."""
        lam = np.asarray(lam, dtype=float)[..., None]
        j = np.arange(1, self._J_MAX + 1, dtype=float)
        s = 2.0 ** j
        w = 4.0 ** -j * j ** -self.p / self._norm
        return np.sum(w * np.exp(-0.5 * (lam / s) ** 2) / (s * math.sqrt(2 * math.pi)), axis=-1)

    def validation_grid(self, n=257):
        return np.linspace(0.0, 10.0, n)[1:]

    def describe(self):
        return {"name": self.name, "params": {"p": self.p}}


def dyadic(p: float = 1.5, delta_max: float = math.inf) -> DyadicMixtureModel:
    if not p > 1:
        raise CovarianceValidationError("r''(0) < 0", -math.inf, "dyadic mixture needs p > 1")
    return DyadicMixtureModel(float(p), delta_max).validate()


@dataclass(frozen=True, eq=False)
class SyntheticModel(CovarianceModel):
    """Diagnostics-only model specified by theta''(tau) near 0.

    ``r''(tau) = r''(0) + theta''(tau)``; r' and r are recovered by
    integration. No positive-definite covariance is implied, so these models
    refuse simulation.
    """

    theta2_ast: ex.Node
    r2_zero: float = -1.0
    delta_max: float = 0.5
    validation_eps: float = 1e-9
    name: str = "synthetic"
    simulable = False
    exact_theta2 = True
    theta2_floor = 1e-200

    @property
    def r2_0(self) -> float:
        return float(self.r2_zero)

    def theta2(self, tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(all="ignore"):
            v = np.asarray(ex.evaluate_numpy(self.theta2_ast, tau=tau), dtype=float) + 0 * tau
        return np.where(tau == 0, 0.0, v)

    def _jet(self, tau):
        tau = np.asarray(tau, dtype=float)
        jt = ex.evaluate_jet(self.theta2_ast, "tau", tau)
        th2 = self.theta2(tau)
        th1 = self.theta1(tau)
        th0 = self.theta(tau)
        d0 = 1.0 + self.r2_zero * tau ** 2 / 2 + th0
        d1 = self.r2_zero * tau + th1
        d2 = self.r2_zero + th2
        d3 = np.where(tau == 0, np.nan_to_num(jt.d1, nan=np.inf), jt.d1)
        d4 = np.where(tau == 0, np.nan_to_num(jt.d2, nan=np.inf), jt.d2)
        return TaylorJet4.from_derivatives([d0, d1, d2, d3, d4])

    def one_minus_r(self, tau):
        tau = np.asarray(tau, dtype=float)
        return -self.r2_zero * tau ** 2 / 2 - self.theta(tau)

    def validation_grid(self, n=65):
        return np.linspace(0.0, self.delta_max, n)[1:]

    def describe(self):
        return {"name": self.name, "theta2": ex.to_string(self.theta2_ast), "r2_0": self.r2_zero}


def synthetic(theta2: str, r2_0: float = -1.0, delta_max: float = 0.5) -> SyntheticModel:
    return SyntheticModel(ex.parse(theta2), float(r2_0), float(delta_max)).validate()


class SpectralModel(CovarianceModel):
    """Correlation defined by a one-sided spectral density on lambda >= 0.

    ``r(tau) = int_0^inf f(l) cos(l tau) dl / int_0^inf f``. The density is
    either an expression in ``lambda`` or a table of ``(lambda, f)`` pairs,
    linearly interpolated and zero outside the table. Derivatives are
    computed by adaptive quadrature (``epsabs=1e-10`` relative to the norm);
    moments that diverge come back as ``inf``.
    """

    name = "spectral"

    def __init__(self, density=None, table=None, delta_max=math.inf, validation_eps=1e-9):
        if (density is None) == (table is None):
            raise ValueError("give exactly one of density (expression) or table")
        self.delta_max = delta_max
        self.validation_eps = validation_eps
        self._cache = {}
        if table is not None:
            tab = np.asarray(table, dtype=float)
            order = np.argsort(tab[:, 0])
            self.table = tab[order]
            if np.any(self.table[:, 1] < 0) or np.any(self.table[:, 0] < 0):
                raise CovarianceValidationError("f >= 0 on lambda >= 0", float(self.table[:, 1].min()))
            self.density_ast = None
            self._lo, self._hi = float(self.table[0, 0]), float(self.table[-1, 0])
            self._breaks = self.table[:, 0]
        else:
            self.density_ast = ex.parse(density, variables=("lambda",)) if isinstance(density, str) else density
            self.table = None
            self._lo, self._hi = 0.0, math.inf
            self._breaks = None
        self._normalizer = self._moment(0, 0.0, raw=True)
        if not (self._normalizer > 0 and np.isfinite(self._normalizer)):
            raise CovarianceValidationError("0 < int f < inf", self._normalizer)

    def f(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.table is not None:
            return np.interp(lam, self.table[:, 0], self.table[:, 1], left=0.0, right=0.0)
        with np.errstate(all="ignore"):
            return np.asarray(ex.evaluate_numpy(self.density_ast, **{"lambda": lam}), dtype=float) + 0 * lam

    def _moment(self, k: int, tau: float, raw: bool = False) -> float:
        key = (k, tau, raw)
        if key in self._cache:
            return self._cache[key]
        # r^(k)(tau) = int f(l) l^k cos(l tau + k pi/2) dl
        sign, trig = [(1, "cos"), (-1, "sin"), (-1, "cos"), (1, "sin"), (1, "cos")][k]
        fun = lambda lam: float(self.f(lam)) * lam ** k
        opts = dict(limit=400)
        with np.errstate(all="ignore"), warnings.catch_warnings():
            # roundoff notices on tabulated (piecewise linear) densities are expected
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            if tau == 0.0:
                if trig == "sin":
                    val = 0.0
                else:
                    val = self._plain(fun, opts)
            else:
                if self._hi == math.inf:
                    # finite head plus oscillatory tail (QAWF)
                    split = 50.0
                    head = integrate.quad(fun, 0.0, split, weight=trig, wvar=tau, **opts)[0]
                    tail = integrate.quad(lambda l: fun(l + split), 0.0, np.inf, weight=trig, wvar=tau,
                                          limlst=200)[0]
                    # shift the tail's phase back: trig(tau (l + split))
                    if trig == "cos":
                        tail_c = tail
                        tail_s = integrate.quad(lambda l: fun(l + split), 0.0, np.inf, weight="sin",
                                                wvar=tau, limlst=200)[0]
                        tail = tail_c * math.cos(tau * split) - tail_s * math.sin(tau * split)
                    else:
                        tail_s = tail
                        tail_c = integrate.quad(lambda l: fun(l + split), 0.0, np.inf, weight="cos",
                                                wvar=tau, limlst=200)[0]
                        tail = tail_s * math.cos(tau * split) + tail_c * math.sin(tau * split)
                    val = head + tail
                else:
                    val = integrate.quad(fun, self._lo, self._hi, weight=trig, wvar=tau, **opts)[0]
        val = sign * val
        if not raw:
            val = val / self._normalizer
        self._cache[key] = val
        return val

    def _plain(self, fun, opts):
        if self._hi == math.inf:
            return integrate.quad(fun, 0.0, np.inf, **opts)[0]
        pts = None
        if self._breaks is not None and len(self._breaks) <= 100:
            pts = self._breaks[1:-1]
        return integrate.quad(fun, self._lo, self._hi, points=pts, **opts)[0]

    def _jet(self, tau):
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        d = np.empty((5, flat.size))
        for i, t in enumerate(flat):
            for k in range(5):
                d[k, i] = self._moment(k, float(t))
        return TaylorJet4.from_derivatives([row.reshape(tau.shape) for row in d])

    def r(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.array([self._moment(0, float(t)) for t in tau.ravel()]).reshape(tau.shape)

    @property
    def r4_0(self):
        return self._moment(4, 0.0)

    @cached_property
    def first_stationary_lag(self) -> float:
        # coarse scan: every lag costs a quadrature here
        grid = np.linspace(0.0, min(self.delta_max, 20.0), 257)[1:]
        up = np.flatnonzero(self.jet(grid).d1 >= 0)
        return float(grid[up[0]]) if up.size else math.inf

    def validation_grid(self, n=33):
        return np.linspace(0.0, min(self.delta_max, 10.0), n)[1:]

    def describe(self):
        if self.table is not None:
            return {"name": self.name, "table_points": int(len(self.table))}
        return {"name": self.name, "density": ex.to_string(self.density_ast)}


_BUILTIN = re.compile(r"^\s*(gaussian|cosine|matern32|matern52|dyadic)\s*\(\s*([^()]*)\s*\)\s*$")
_BUILTINS = {"gaussian": gaussian, "cosine": cosine, "matern32": matern32, "matern52": matern52, "dyadic": dyadic}


def parse_covariance(text: str, delta_max: float = math.inf,
                     validation_eps: float = 1e-9) -> CovarianceModel:
    """Build and validate a model from an expression in ``tau`` or a builtin call.

    Builtins: ``gaussian(scale)``, ``cosine(freq)``, ``matern32(scale)``, ``matern52(scale)``,
    ``dyadic(p)``.
    """
    if not delta_max > 0:
        raise ValueError("delta_max must be positive")
    m = _BUILTIN.match(text)
    if m:
        arg = m.group(2).strip()
        try:
            value = float(arg) if arg else 1.0 if m.group(1) != "dyadic" else 1.5
        except ValueError:
            pos = text.index(arg)
            raise ex.ExpressionSyntaxError("builtin parameter must be a number", text, pos) from None
        return _BUILTINS[m.group(1)](value, delta_max=delta_max)
    ast = ex.parse(text)
    model = ExpressionModel(ast, delta_max, validation_eps)
    return model.validate()


def derivatives_at(model: CovarianceModel, tau: float) -> TaylorJet4:
    """(r, r', r'', r''', r'''') at ``0 <= tau <= delta_max``."""
    model.check_lag(tau)
    return model.jet(tau)


def theta_at(model: CovarianceModel, tau: float) -> float:
    """theta(tau) = r(tau) - 1 - r''(0) tau^2 / 2 for ``tau > 0``."""
    model.check_lag(tau, allow_zero=False)
    return float(model.theta(tau))
