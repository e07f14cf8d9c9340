from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlspde.coefficients import (
    CoefficientError,
    CoefficientFunction,
    InverseError,
    arctan,
    from_spec,
    linear,
    sine,
)


@pytest.mark.parametrize("coeff", [linear(2.0, 0.5), sine(0.5, 0.3), arctan(2.0, -0.1)])
def test_ellipticity_bounds_hold(coeff):
    lo, hi = coeff.check_ellipticity()
    assert coeff.c_minus <= lo + 1e-12 and hi <= coeff.c_plus + 1e-12


def test_bad_bounds_detected():
    lying = CoefficientFunction("lie", lambda v: 3 * v, lambda v: 3 + 0 * v, lambda v: 0 * v, 1.0, 2.0)
    with pytest.raises(CoefficientError):
        lying.check_ellipticity()
    with pytest.raises(CoefficientError):
        CoefficientFunction("bad", np.sin, np.cos, np.sin, 2.0, 1.0)


@pytest.mark.parametrize("coeff", [sine(0.5), sine(0.9, 1.0), arctan(3.0, 0.2)])
@settings(max_examples=40, deadline=None)
@given(y=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
def test_inverse_round_trip(coeff, y):
    y = np.array(y)
    v = coeff.inverse(y)
    assert np.all(np.abs(coeff.phi(v) - y) <= 1e-10 * np.maximum(1.0, np.abs(y)))


def test_inverse_oracle_value():
    # phi(1) = 1 + sin(1)/2, computed to 30 digits with mpmath
    assert sine(0.5).inverse(np.array([1.42073549240394825332625116082]))[0] == pytest.approx(1.0, abs=1e-12)


def test_inverse_with_guess_and_exact_inverse():
    c = sine(0.5)
    y = np.linspace(-3, 3, 7)
    assert np.allclose(c.inverse(y, guess=np.zeros(7)), c.inverse(y), atol=1e-12)
    lin = linear(2.0, 1.0)
    assert np.allclose(lin.inverse(np.array([5.0])), [2.0])


def test_inverse_failure_raises():
    c = sine(0.5)
    with pytest.raises(InverseError):
        c.inverse(np.array([3.0]), max_iter=0)


def test_from_spec():
    c = from_spec({"name": "sine", "amplitude": 0.25, "offset": 1.0})
    assert (c.c_minus, c.c_plus) == (0.75, 1.25)
    assert c.spec() == {"name": "sine", "amplitude": 0.25, "offset": 1.0}
    assert from_spec(c.spec()).phi(np.array([0.3])) == pytest.approx(c.phi(np.array([0.3])))
    with pytest.raises(CoefficientError):
        from_spec({"name": "cubic"})
    with pytest.raises(CoefficientError):
        from_spec({"name": "linear", "gain": 2})
    with pytest.raises(CoefficientError):
        sine(1.0)
    with pytest.raises(CoefficientError):
        linear(0.0)
    with pytest.raises(CoefficientError):
        arctan(-1.0)


def test_derivatives_consistent():
    for c in (sine(0.5), arctan(1.5)):
        v = np.linspace(-4, 4, 41)
        h = 1e-6
        assert np.allclose((c.phi(v + h) - c.phi(v - h)) / (2 * h), c.dphi(v), atol=1e-8)
        assert np.allclose((c.dphi(v + h) - c.dphi(v - h)) / (2 * h), c.d2phi(v), atol=1e-7)
