from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlspde import noise as N
from qlspde.coefficients import arctan, linear, sine
from qlspde.energy import decay_rate_bound
from qlspde.grid import GridFunction, integrate, nodes
from qlspde.stationary import (
    StationaryError,
    StationaryProfile,
    build_theta,
    mu_smallness_threshold,
    residual_theta,
    separable_stationary,
    solve_zm,
    stationary_profile,
)

TWO_PI = 2.0 * np.pi


def smooth_noise(n: int, amp: float = 0.3, sigma: float = 0.0) -> N.NoiseSample:
    x = nodes(n)
    return N.from_eta(amp * np.sin(TWO_PI * x) + sigma * x, sigma)


def test_zero_noise():
    theta, mu = build_theta(N.zero_noise(32))
    assert mu == 0.0
    assert np.all(theta.values == 1.0)


@pytest.mark.parametrize("sigma", [-1.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("quadrature", ["spectral", "trapezoid"])
def test_constant_noise_closed_form(sigma, quadrature):
    theta, mu = build_theta(N.constant_noise(256, sigma), quadrature)
    tol = 1e-10 if quadrature == "spectral" else 1e-4
    assert np.max(np.abs(theta.values - 1.0)) < tol
    assert mu == pytest.approx(sigma, abs=tol)


def test_sigma_zero_branch_is_exponential():
    n = 1024
    x = nodes(n)
    eta = np.sin(TWO_PI * x) / TWO_PI
    theta, mu = build_theta(N.from_eta(eta, 0.0))
    assert mu == 0.0
    assert np.max(np.abs(theta.values - np.exp(-eta))) < 1e-10


def test_against_high_precision_quadrature_oracle():
    # eta = 0.3 sin(2 pi x) + 0.5 x; reference values from mpmath quadrature at 30 digits
    n = 256
    theta, mu = build_theta(smooth_noise(n, 0.3, 0.5))
    assert mu == pytest.approx(0.500685873374494770295903336009, abs=1e-13)
    for x, ref in ((0.25, 0.760063280302089947083273095469), (0.5, 1.04798760034040584587794334964), (0.75, 1.37976224510062000827161074382)):
        assert theta.values[int(x * n)] == pytest.approx(ref, abs=1e-13)


def test_trapezoid_is_second_order_at_shared_nodes():
    ref, _ = build_theta(smooth_noise(4096, 0.3, 0.5))
    errs = []
    for n in (64, 128):
        th, _ = build_theta(smooth_noise(n, 0.3, 0.5), "trapezoid")
        errs.append(np.max(np.abs(th.values - ref.values[:: 4096 // n])))
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_theta_grid_consistency_between_n_and_2n():
    a, _ = build_theta(smooth_noise(64, 0.3, 0.5), "trapezoid")
    b, _ = build_theta(smooth_noise(128, 0.3, 0.5), "trapezoid")
    assert np.max(np.abs(a.values - b.values[::2])) < 5.0 / 64**2


def test_theta_identity_residual():
    n = 512
    for base in (smooth_noise(n, 0.8), N.sample_bridge(5, n)):
        for sigma in (0.0, 0.7):
            s = N.with_drift(base, sigma)
            theta, mu = build_theta(N.mollify(s, 1e-3))
            assert residual_theta(theta, mu, N.mollified_xi(s, 1e-3)) < 1e-8


def test_residual_constant_case():
    n = 32
    assert residual_theta(GridFunction.constant(1.0, n), 0.4, GridFunction.constant(0.4, n)) < 1e-12


def test_theta_positive_for_many_seeds():
    for seed in range(1000):
        s = N.with_drift(N.sample_bridge(seed, 64), 0.3 * np.sin(seed))
        theta, mu = build_theta(s)
        assert theta.values.min() > 0.0 and theta.values[0] == 1.0
        if s.sigma == 0.0:
            assert mu == 0.0


def test_mu_vanishes_iff_sigma_vanishes():
    s = N.sample_bridge(3, 128)
    assert build_theta(s)[1] == 0.0
    assert abs(build_theta(N.with_drift(s, 1e-3))[1]) > 0.0
    assert abs(build_theta(N.with_drift(s, 1e-3), "trapezoid")[1]) > 0.0


def test_overflow_guard():
    with pytest.raises(StationaryError):
        build_theta(N.constant_noise(16, 400.0))


def test_unknown_quadrature():
    with pytest.raises(ValueError):
        build_theta(N.zero_noise(16), "simpson")


def test_solve_zm_flat_cases():
    theta = GridFunction.constant(1.0, 32)
    assert solve_zm(linear(), theta, 0.7) == pytest.approx(0.7, abs=1e-12)
    # flat theta: phi^{-1}(z) = 1, so z = phi(1) = 1 + sin(1)/2 (mpmath value)
    assert solve_zm(sine(0.5), theta, 1.0) == pytest.approx(1.42073549240394825332625116082, abs=1e-10)


def test_solve_zm_linear_closed_form():
    theta, _ = build_theta(N.sample_bridge(2, 128))
    for m in (-1.0, 0.3, 2.0):
        assert solve_zm(linear(), theta, m) == pytest.approx(m / integrate(theta), abs=1e-10)


def test_solve_zm_nonlinear_oracle():
    # theta = exp(-0.3 sin 2 pi x), phi = v + sin(v)/2, m = 1; z from mpmath quadrature and root finding
    theta, _ = build_theta(smooth_noise(512, 0.3))
    assert solve_zm(sine(0.5), theta, 1.0) == pytest.approx(1.37780257641865103745079623658, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_solve_zm_strictly_monotone(m1, m2):
    theta, _ = build_theta(smooth_noise(64, 0.5))
    c = arctan(2.0)
    if abs(m1 - m2) < 1e-6:
        return
    lo, hi = sorted((m1, m2))
    assert solve_zm(c, theta, lo) < solve_zm(c, theta, hi)


@pytest.mark.parametrize("m", [-1.0, 0.0, 0.5, 2.0])
def test_round_trip_mass(m):
    theta, _ = build_theta(N.with_drift(N.sample_bridge(4, 128), 0.2))
    for c in (sine(0.5, 0.3), arctan(1.0)):
        z = solve_zm(c, theta, m)
        assert integrate(stationary_profile(c, theta, z)) == pytest.approx(m, abs=1e-8)


def test_stationary_profile_linear():
    theta, _ = build_theta(N.sample_bridge(1, 64))
    m = 0.8
    z = solve_zm(linear(), theta, m)
    assert np.allclose(stationary_profile(linear(), theta, z).values, m / integrate(theta) * theta.values, atol=1e-12)
    assert np.allclose(stationary_profile(linear(), GridFunction.constant(1.0, 16), 0.4).values, 0.4)


def test_mu_threshold_values():
    theta = GridFunction.constant(1.0, 32)
    assert mu_smallness_threshold(linear(), theta) == pytest.approx(1.0, rel=1e-14)
    # doubling c_- while keeping c_+ doubles mu*
    a = mu_smallness_threshold(sine(0.5), theta)
    from qlspde.coefficients import CoefficientFunction

    s = sine(0.5)
    doubled = CoefficientFunction("s2", s.phi, s.dphi, s.d2phi, 2 * s.c_minus, s.c_plus)
    assert mu_smallness_threshold(doubled, theta) == pytest.approx(2 * a, rel=1e-14)


def test_mu_threshold_brackets_sign_change():
    theta, _ = build_theta(smooth_noise(128, 0.4))
    c = sine(0.5)
    mu_star = mu_smallness_threshold(c, theta)
    assert decay_rate_bound(c, theta, 0.99 * mu_star)[0] < 0.0
    assert decay_rate_bound(c, theta, 1.01 * mu_star)[0] > 0.0


def test_separable_log_case_matches_exponential():
    n = 64
    s = N.sample_bridge(6, n)
    C = 0.4
    th = separable_stationary(linear(), linear(), s, C)
    assert np.max(np.abs(th.values - np.exp(C) * np.exp(-s.eta.values))) < 1e-11


def test_separable_closed_form_arctan():
    # chi(v) = 1 + v^2 with phi(v) = v: Psi(t) = atan t - pi/4, so theta_C = tan(-eta + C + pi/4)
    n = 64
    s = smooth_noise(n, 0.3)
    th = separable_stationary(linear(), lambda v: 1.0 + v * v, s, 0.1)
    assert np.max(np.abs(th.values - np.tan(-s.eta.values + 0.1 + np.pi / 4))) < 1e-11


def test_separable_zero_noise_constant():
    th = separable_stationary(sine(0.5), lambda v: 2.0 + np.cos(v), N.zero_noise(16), 0.7)
    assert np.ptp(th.values) == 0.0


def test_separable_residual_trend():
    n = 256
    x = nodes(n)
    s = N.from_eta(0.5 * np.sin(TWO_PI * 2 * x), 0.0)
    c = sine(0.5)

    def chi(v):
        return 1.0 + c.phi(v) ** 2

    res = []
    for eps in (1e-2, 1e-3, 1e-4):
        th = separable_stationary(c, chi, N.mollify(s, eps), 0.0)
        xi = N.mollified_xi(s, eps).values
        # with psi(theta) = chi(phi^{-1}(theta)) = 1 + theta^2
        r = np.fft.irfft(np.fft.rfft(th.values) * 2j * np.pi * np.arange(n // 2 + 1), n) + (1 + th.values**2) * xi
        res.append(np.max(np.abs(r)))
    assert max(res) < 1e-9


def test_separable_rejects_drift_and_nonpositive_psi():
    with pytest.raises(StationaryError):
        separable_stationary(linear(), linear(), N.constant_noise(16, 0.1), 0.0)
    with pytest.raises(StationaryError):
        separable_stationary(linear(), lambda v: v - 5.0, N.sample_bridge(1, 16), 0.0)


def test_profile_cache_and_export(tmp_path):
    prof = StationaryProfile.from_noise(N.zero_noise(16), linear())
    z, vb = prof.for_mass(0.7)
    assert z == pytest.approx(0.7) and prof.for_mass(0.7)[1] is vb
    csv, js = prof.export(tmp_path, 0.7)
    data = json.loads(js.read_text())
    assert set(data) == {"m", "mu", "z_m", "c1", "c2", "C_theta", "mu_star"}
    assert data["mu"] == 0.0 and data["z_m"] == pytest.approx(0.7)
    lines = csv.read_text().splitlines()
    assert lines[0] == "x,theta,v_bar" and len(lines) == 17


def test_profile_cache_is_thread_safe():
    from concurrent.futures import ThreadPoolExecutor

    prof = StationaryProfile.from_noise(N.sample_bridge(2, 64), sine(0.5))
    with ThreadPoolExecutor(8) as pool:
        zs = list(pool.map(lambda m: prof.for_mass(m)[0], [0.5] * 16 + [1.0] * 16))
    assert len(set(zs[:16])) == 1 and len(set(zs[16:])) == 1
