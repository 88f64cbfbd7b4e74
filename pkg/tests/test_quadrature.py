import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czlab.quadrature import AccuracyError, fixed_panel, integrate, panel_rule, quad


def test_polynomial_exact_single_panel():
    k, err = panel_rule(lambda p, x: x**20, [0], [0.0], [1.0])
    assert k[0] == pytest.approx(1 / 21, rel=1e-14)


@pytest.mark.parametrize("f, lo, hi, exact", [
    (np.exp, 0.0, 3.0, math.exp(3) - 1),
    (lambda x: 1 / x, 1.0, 1e4, math.log(1e4)),
    (np.sqrt, 0.0, 1.0, 2 / 3),
    (lambda x: np.sin(51 * x), 0.0, math.pi, 2 / 51),
])
def test_known_integrals(f, lo, hi, exact):
    res = quad(f, lo, hi, rtol=1e-12)
    assert res.value == pytest.approx(exact, rel=1e-11, abs=1e-14)
    assert res.error <= 1e-11 * abs(exact) + 1e-14


def test_error_estimate_bounds_true_error():
    res = quad(lambda x: 1 / (1e-3 + x * x), -1, 1, rtol=1e-9)
    exact = 2 * math.atan(1 / math.sqrt(1e-3)) / math.sqrt(1e-3)
    assert abs(res.value - exact) <= max(res.error, 1e-12 * exact)


def test_accuracy_failure_carries_estimate():
    with pytest.raises(AccuracyError) as info:
        integrate(lambda p, x: 1 / np.abs(x - 0.3), [0], [0.0], [1.0], rtol=1e-12, max_panels=200)
    assert info.value.estimate > 0


def test_piece_index_reaches_integrand():
    seen = []

    def f(p, x):
        seen.append(np.unique(p))
        return np.where(p == 1, 2.0, 1.0) + 0 * x

    res = integrate(f, [0, 1], [0.0, 0.0], [1.0, 1.0])
    assert res.value == pytest.approx(3.0, rel=1e-15)
    assert set(np.concatenate(seen)) == {0, 1}


def test_fixed_panel_vectorised():
    a = np.array([0.0, 1.0])
    b = np.array([1.0, 3.0])
    np.testing.assert_allclose(fixed_panel(lambda x: x**3, a, b), [0.25, 20.0], rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-2.0, 2.0), st.floats(0.01, 3.0))
def test_split_additivity(scale, lo, width):
    f = lambda x: np.exp(-scale * x * x)
    mid = lo + 0.37 * width
    whole = quad(f, lo, lo + width, rtol=1e-13).value
    parts = quad(f, lo, mid, rtol=1e-13).value + quad(f, mid, lo + width, rtol=1e-13).value
    assert whole == pytest.approx(parts, rel=1e-12)
