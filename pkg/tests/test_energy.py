from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlspde import noise as N
from qlspde.coefficients import linear, sine
from qlspde.energy import (
    c1_constant,
    c_of_theta,
    decay_rate_bound,
    diagnostics,
    energy,
    energy_gradient,
    face_weights,
    grad_norm_sq,
    norm_equivalence_constant,
    poincare_constant,
    verify_poincare,
    weighted_laplacian,
)
from qlspde.grid import GridError, GridFunction, nodes
from qlspde.stationary import build_theta

TWO_PI = 2.0 * np.pi


def sine_f(n: int) -> GridFunction:
    return GridFunction.from_function(lambda x: np.sin(TWO_PI * x), n)


def test_analytic_sine_values():
    f, th = sine_f(64), GridFunction.constant(1.0, 64)
    lhs, rhs = verify_poincare(f, th)
    assert lhs == pytest.approx(np.pi**2, abs=1e-9)
    assert rhs == pytest.approx(4 * np.pi**4, abs=1e-9)


def test_constant_has_zero_energy():
    th, _ = build_theta(N.sample_bridge(1, 32))
    f = GridFunction.constant(2.5, 32)
    assert energy(f, th) < 1e-20 and energy(f, th, "fd") == 0.0
    assert np.max(np.abs(energy_gradient(f, th, "fd").values)) < 1e-12


def test_fd_energy_converges_to_spectral():
    x = nodes(512)
    th = GridFunction(np.exp(-0.3 * np.sin(TWO_PI * x)))
    f = GridFunction(np.cos(TWO_PI * x) + 0.2 * np.sin(2 * TWO_PI * x))
    assert energy(f, th, "fd") == pytest.approx(energy(f, th), rel=1e-3)


def test_fd_gradient_is_exact_gradient_of_fd_energy():
    rng = np.random.default_rng(0)
    n = 16
    th = GridFunction(np.exp(rng.uniform(-1, 1, n)))
    f = GridFunction(rng.standard_normal(n))
    g = energy_gradient(f, th, "fd").values
    h = 1e-6
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        num = (energy(f + GridFunction(e), th, "fd") - energy(f - GridFunction(e), th, "fd")) / (2 * h)
        # d Phi_h / d f_j = g_j theta_j dx in the weighted inner product
        assert num == pytest.approx(g[j] * th.values[j] / n, rel=1e-6, abs=1e-9)


def test_weighted_laplacian_conserves():
    rng = np.random.default_rng(1)
    f = rng.standard_normal(32)
    tf = face_weights(np.exp(rng.standard_normal(32)))
    assert abs(np.sum(weighted_laplacian(f, tf))) < 1e-9


def test_poincare_gate_random_pairs():
    rng = np.random.default_rng(2024)
    violations = 0
    for i in range(1000):
        n = int(rng.choice([32, 64, 128]))
        th, _ = build_theta(N.sample_bridge(int(rng.integers(2**32)), n, int(rng.integers(1, n // 2 + 1))))
        k = int(rng.integers(1, n // 4))
        f = GridFunction(np.fft.irfft(np.concatenate(([0], rng.standard_normal(k) + 1j * rng.standard_normal(k), np.zeros(n // 2 - k))), n))
        method = "spectral" if i % 2 else "fd"
        lhs, rhs = verify_poincare(f, th, method)
        violations += lhs > rhs * (1 + 1e-12)
    assert violations == 0


def test_constants_for_flat_theta():
    th = GridFunction.constant(1.0, 16)
    c = linear()
    assert c_of_theta(th) == 1.0
    assert c1_constant(c, th) == pytest.approx(np.sqrt(2.0))
    assert poincare_constant(th) == 0.5
    bound, fast = decay_rate_bound(c, th, 0.0)
    assert bound == -1.0 and fast == 2.0
    assert norm_equivalence_constant(th) == 1.0


def test_c2_lower_bound():
    # Cauchy-Schwarz: int theta int 1/theta >= 1
    th, _ = build_theta(N.sample_bridge(5, 128))
    assert poincare_constant(th) >= 0.5


def test_diagnostics_branches():
    th = GridFunction.constant(1.0, 32)
    f = sine_f(32)
    c = sine(0.5)
    d0 = diagnostics(f, th, c, 0.0)
    assert d0.c_star == pytest.approx(c.c_minus / 0.5)
    d_small = diagnostics(f, th, c, 0.1)
    assert d_small.c_star == pytest.approx(-d_small.C_theta)
    d_big = diagnostics(f, th, c, 10.0)
    assert d_big.c_star is None and d_big.C_theta > 0
    assert json.loads(d0.to_json())["phi_value"] == pytest.approx(np.pi**2)


def test_positive_theta_required():
    with pytest.raises(GridError):
        energy(sine_f(16), GridFunction.constant(-1.0, 16))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_poincare_property(seed):
    rng = np.random.default_rng(seed)
    n = 64
    th = GridFunction(np.exp(rng.uniform(-2, 2) * np.sin(TWO_PI * nodes(n) + rng.uniform(0, 6))))
    f = GridFunction(rng.standard_normal(n))
    lhs, rhs = verify_poincare(f, th, "fd")
    assert lhs <= rhs * (1 + 1e-12)
    assert grad_norm_sq(f, th, "fd") >= 0.0
