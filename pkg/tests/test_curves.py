import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossings.curves import (CurveSpec, constant_curve, curve_from_expressions,
                              empirical_modulus, linear_curve)


def brute_modulus(values, spacing, h):
    k = int(round(h / spacing))
    n = values.size
    best = 0.0
    for i in range(n):
        j = min(n, i + k + 1)
        seg = values[i:j]
        best = max(best, float(seg.max() - seg.min()))
    return best


@given(st.integers(0, 2 ** 32 - 1))
def test_empirical_modulus_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    vals = np.cumsum(rng.standard_normal(65))
    lookup = lambda s: np.interp(s, np.linspace(0, 1, 65), vals)
    hs, gs = empirical_modulus(lookup, 1.0, n_points=65)
    spacing = 1.0 / 64
    assert hs[0] == pytest.approx(spacing)
    for h, g in zip(hs, gs):
        assert g == pytest.approx(brute_modulus(vals, spacing, h), abs=1e-12)


def test_empirical_modulus_is_nondecreasing_and_linear_for_lipschitz():
    # psi_dot = sin has Lipschitz constant 1 on [0, 1], attained at 0
    hs, gs = empirical_modulus(np.sin, 1.0)
    assert np.all(np.diff(gs) >= 0)
    assert np.all(gs <= hs + 1e-12)
    assert gs == pytest.approx(np.sin(hs), rel=1e-12)


def test_factories():
    s = np.linspace(0, 3, 7)
    c = constant_curve(0.7)
    assert np.all(c.psi(s) == 0.7) and np.all(c.psi_dot(s) == 0.0) and c.constant == 0.7
    lin = linear_curve(0.5, 0.3)
    assert np.allclose(lin.psi(s), 0.5 + 0.3 * s) and np.all(lin.psi_dot(s) == 0.3)
    assert lin.constant is None
    assert linear_curve(1.0, 0.0).constant == 1.0
    assert np.all(lin.gamma(s) == 0.0)


def test_curve_from_expressions_vectorizes_constants():
    c = curve_from_expressions("2", "0", gamma="0*h", name="two")
    s = np.linspace(0, 1, 5)
    assert c.psi(s).shape == s.shape and np.all(c.psi(s) == 2.0)
    assert c.psi_dot(s).shape == s.shape
    assert c.gamma(s).shape == s.shape
    assert c.name == "two"


def test_check_derivative():
    good = curve_from_expressions("sin(s)", "cos(s)")
    assert good.check_derivative(np.linspace(0, 2, 11)) < 1e-5
    bad = CurveSpec(np.sin, lambda s: np.cos(s) + 0.01)
    with pytest.raises(ValueError, match="finite differences"):
        bad.check_derivative(np.linspace(0, 2, 11))
