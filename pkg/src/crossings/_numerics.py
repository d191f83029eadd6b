"""Small shared quadrature helpers."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def integrate_from_zero(f, tau, kernel=None, panels: int = 48, nodes: int = 8):
    """Vectorized ``int_0^tau f(s) kernel(s, tau) ds`` on dyadic panels.

    Panels are ``[tau 2^-(k+1), tau 2^-k]``; the remainder ``[0, tau 2^-panels]`` is
    dropped, which is harmless for integrands bounded near 0.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    x, w = gauss_legendre(nodes)
    k = np.arange(panels)
    lo = 2.0 ** -(k + 1)
    width = lo  # panel [lo, 2 lo]
    unit_s = (lo[:, None] + width[:, None] * x[None, :]).ravel()
    unit_w = (width[:, None] * w[None, :]).ravel()
    s = tau[:, None] * unit_s[None, :]
    vals = np.asarray(f(s.ravel()), dtype=float).reshape(s.shape)
    if kernel is not None:
        vals = vals * kernel(s, tau[:, None])
    return (vals * unit_w[None, :]).sum(axis=1) * tau
