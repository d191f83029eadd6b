"""Order-4 forward Taylor jets.

A jet stores the normalized Taylor coefficients ``c[k] = f^(k)(x0) / k!`` of a
scalar function at a point; arithmetic on jets propagates them exactly (up to
rounding). Coefficients may be numpy arrays, so one jet evaluates many points
at once.
"""
from __future__ import annotations

import math

import numpy as np

ORDER = 4
_FACT = np.array([math.factorial(k) for k in range(ORDER + 1)], dtype=float)


class TaylorJet4:
    """Value and first four derivatives of an expression at a point (or array of points)."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = [np.asarray(a, dtype=float) for a in coeffs]
        if len(self.c) != ORDER + 1:
            raise ValueError("a TaylorJet4 needs exactly 5 coefficients")

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, like=0.0):
        z = np.zeros_like(np.asarray(like, dtype=float))
        return cls([z + value, z, z, z, z])

    @classmethod
    def variable(cls, x):
        x = np.asarray(x, dtype=float)
        z = np.zeros_like(x)
        return cls([x, z + 1.0, z, z, z])

    @classmethod
    def from_derivatives(cls, d):
        return cls([np.asarray(d[k], dtype=float) / _FACT[k] for k in range(ORDER + 1)])

    # -- derivative view ----------------------------------------------------
    def derivative(self, k: int):
        return self.c[k] * _FACT[k]

    @property
    def d0(self):
        return self.c[0]

    @property
    def d1(self):
        return self.c[1]

    @property
    def d2(self):
        return self.c[2] * 2.0

    @property
    def d3(self):
        return self.c[3] * 6.0

    @property
    def d4(self):
        return self.c[4] * 24.0

    def derivatives(self):
        return tuple(self.derivative(k) for k in range(ORDER + 1))

    def __repr__(self):
        return "TaylorJet4(%s)" % ", ".join(repr(d) for d in self.derivatives())

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TaylorJet4):
            return other
        return TaylorJet4.constant(other, self.c[0])

    def __add__(self, other):
        o = self._coerce(other)
        return TaylorJet4([a + b for a, b in zip(self.c, o.c)])

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet4([-a for a in self.c])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        a, b = self.c, o.c
        return TaylorJet4([sum(a[j] * b[k - j] for j in range(k + 1)) for k in range(ORDER + 1)])

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        a, b = self.c, o.c
        q = []
        with np.errstate(divide="ignore", invalid="ignore"):
            for k in range(ORDER + 1):
                acc = a[k] - sum(b[j] * q[k - j] for j in range(1, k + 1))
                q.append(acc / b[0])
        return TaylorJet4(q)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, other):
        if isinstance(other, TaylorJet4):
            if all(np.all(ci == 0) for ci in other.c[1:]):
                return self._pow_const(other.c[0])
            return exp(other * log(self))
        return self._pow_const(other)

    def __rpow__(self, other):
        return exp(self * log(self._coerce(other)))

    def _pow_const(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 0 and float(p).is_integer() and 0 <= float(p) <= 64:
            n = int(p)
            out = TaylorJet4.constant(1.0, self.c[0])
            base = self
            while n:
                if n & 1:
                    out = out * base
                base = base * base
                n >>= 1
            return out
        a = self.c
        g = []
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            g.append(np.power(a[0], p))
            # g' f = p f' g, written on normalized coefficients
            for k in range(1, ORDER + 1):
                acc = sum((p * j - (k - j)) * a[j] * g[k - j] for j in range(1, k + 1))
                g.append(acc / (k * a[0]))
        return TaylorJet4(g)


def exp(x: TaylorJet4) -> TaylorJet4:
    a = x.c
    with np.errstate(over="ignore"):
        e = [np.exp(a[0])]
    for k in range(1, ORDER + 1):
        e.append(sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k)
    return TaylorJet4(e)


def log(x: TaylorJet4) -> TaylorJet4:
    a = x.c
    with np.errstate(divide="ignore", invalid="ignore"):
        out = [np.log(a[0])]
        for k in range(1, ORDER + 1):
            acc = a[k] - sum(j * out[j] * a[k - j] for j in range(1, k)) / k
            out.append(acc / a[0])
    return TaylorJet4(out)


def sincos(x: TaylorJet4):
    a = x.c
    s = [np.sin(a[0])]
    c = [np.cos(a[0])]
    for k in range(1, ORDER + 1):
        s.append(sum(j * a[j] * c[k - j] for j in range(1, k + 1)) / k)
        c.append(-sum(j * a[j] * s[k - j] for j in range(1, k + 1)) / k)
    return TaylorJet4(s), TaylorJet4(c)


def sin(x: TaylorJet4) -> TaylorJet4:
    return sincos(x)[0]


def cos(x: TaylorJet4) -> TaylorJet4:
    return sincos(x)[1]


def sqrt(x: TaylorJet4) -> TaylorJet4:
    a = x.c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = [np.sqrt(a[0])]
        for k in range(1, ORDER + 1):
            acc = a[k] - sum(s[j] * s[k - j] for j in range(1, k))
            s.append(acc / (2.0 * s[0]))
    return TaylorJet4(s)
