"""Curves psi crossed by the process, with the modulus of continuity of psi'."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from . import expression as ex


class InvalidModulusError(ValueError):
    pass


@dataclass(frozen=True)
class CurveSpec:
    """A C^1 curve. ``gamma`` is the modulus of continuity of ``psi_dot``.

    When ``gamma`` is None it is estimated on ``[0, delta]`` by
    :func:`empirical_modulus`.
    """

    psi: Callable
    psi_dot: Callable
    gamma: Optional[Callable] = None
    name: str = "curve"
    constant: Optional[float] = None  # set for psi == x, lets callers short-cut

    def check_derivative(self, points, h: float = 1e-4, rtol: float = 1e-5) -> float:
        """Max relative mismatch between psi_dot and a central difference of psi."""
        s = np.asarray(points, dtype=float)
        fd = (self.psi(s + h) - self.psi(s - h)) / (2 * h)
        d = np.asarray(self.psi_dot(s), dtype=float)
        rel = np.abs(d - fd) / np.maximum(np.abs(fd), 1.0)
        worst = float(np.max(rel))
        if worst > rtol:
            raise ValueError(f"psi_dot disagrees with finite differences of psi (rel {worst:.2e})")
        return worst


def _vectorize(fn):
    return lambda s: np.asarray(fn(np.asarray(s, dtype=float)), dtype=float) + 0 * np.asarray(s, dtype=float)


def constant_curve(x: float) -> CurveSpec:
    x = float(x)
    return CurveSpec(psi=lambda s: np.full_like(np.asarray(s, dtype=float), x),
                     psi_dot=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
                     gamma=lambda h: np.zeros_like(np.asarray(h, dtype=float)),
                     name=f"const({x!r})", constant=x)


def linear_curve(x: float, slope: float) -> CurveSpec:
    x, slope = float(x), float(slope)
    return CurveSpec(psi=lambda s: x + slope * np.asarray(s, dtype=float),
                     psi_dot=lambda s: np.full_like(np.asarray(s, dtype=float), slope),
                     gamma=lambda h: np.zeros_like(np.asarray(h, dtype=float)),
                     name=f"linear({x!r},{slope!r})", constant=x if slope == 0 else None)


def curve_from_expressions(psi: str, psi_dot: str, gamma: Optional[str] = None,
                           name: Optional[str] = None) -> CurveSpec:
    """Curve from expressions in ``s`` (``psi``, ``psi_dot``) and ``h`` (``gamma``)."""
    pa = ex.parse(psi, variables=("s",))
    pd = ex.parse(psi_dot, variables=("s",))
    g = None
    if gamma:
        ga = ex.parse(gamma, variables=("h",))
        g = _vectorize(lambda h: ex.evaluate_numpy(ga, h=h))
    return CurveSpec(psi=_vectorize(lambda s: ex.evaluate_numpy(pa, s=s)),
                     psi_dot=_vectorize(lambda s: ex.evaluate_numpy(pd, s=s)),
                     gamma=g, name=name or psi)


def empirical_modulus(psi_dot: Callable, delta: float, n_points: int = 4096):
    """Estimate ``gamma(h) = max |psi_dot(s) - psi_dot(u)|, |s - u| <= h`` on [0, delta].

    Returns ``(h, gamma_h)`` on the dyadic lags ``h = spacing * 2^k`` that the
    sample resolves (windows of 2^k + 1 consecutive points).
    """
    s = np.linspace(0.0, delta, n_points)
    v = np.asarray(psi_dot(s), dtype=float)
    spacing = s[1] - s[0]
    hs, gs = [], []
    k = 0
    while 2 ** k < n_points:
        w = 2 ** k + 1
        hi = ndimage.maximum_filter1d(v, size=w, mode="nearest", origin=-(w // 2))
        lo = ndimage.minimum_filter1d(v, size=w, mode="nearest", origin=-(w // 2))
        hs.append(spacing * 2 ** k)
        gs.append(float(np.max((hi - lo)[: n_points - w + 1])))
        k += 1
    return np.array(hs), np.array(gs)
