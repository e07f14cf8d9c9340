from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlspde import noise as N
from qlspde.grid import GridError, GridFunction, integrate, nodes

TWO_PI = 2.0 * np.pi


def test_substream_seed_is_xor():
    assert N.substream_seed(10, N.STREAM_NOISE) == 10
    assert N.substream_seed(10, N.STREAM_INITIAL) == 11
    assert N.substream_seed(10, N.STREAM_AUX) == 8
    assert N.substream_seed(2**64 - 1, 1) == 2**64 - 2


def test_bridge_vanishes_at_zero_and_is_deterministic():
    a = N.sample_bridge(5, 64)
    b = N.sample_bridge(5, 64)
    assert a.eta_tilde == b.eta_tilde
    assert a.eta_tilde.values[0] == 0.0
    assert a.sigma == 0.0 and a.kl_modes == 32


def test_bridge_prefix_consistency_across_resolutions():
    # the fine path with the same number of modes agrees with the coarse path at shared nodes
    coarse = N.sample_bridge(9, 64, 16).eta_tilde.values
    fine = N.sample_bridge(9, 256, 16).eta_tilde.values
    assert np.max(np.abs(fine[::4] - coarse)) < 1e-14


def test_bridge_matches_naive_sum():
    z = np.random.default_rng(3).standard_normal(4)
    x = nodes(32)
    naive = sum(z[k - 1] * np.sqrt(2) * np.sin(k * np.pi * x) / (k * np.pi) for k in range(1, 5))
    assert np.max(np.abs(N.bridge_from_coefficients(z, 32) - naive)) < 1e-15


def test_bridge_variance_matches_bridge_covariance():
    # Var w(x) = x (1 - x) for a Brownian bridge; check at x = 1/2 over many seeds
    vals = np.array([N.sample_bridge(s, 64).eta_tilde.values[32] for s in range(2000)])
    # truncation at 32 modes removes variance sum_{k>32} 2/(k pi)^2 over odd k, about 0.003
    assert vals.var() == pytest.approx(0.25, abs=0.025)


def test_bridge_rejects_bad_modes():
    with pytest.raises(GridError):
        N.sample_bridge(1, 16, 9)
    with pytest.raises(GridError):
        N.sample_bridge(1, 4)


def test_periodic_noise_is_smooth_trig_polynomial():
    s = N.sample_periodic(2, 64, 3)
    spec = np.abs(np.fft.rfft(s.eta_tilde.values))
    assert np.all(spec[4:] < 1e-12)
    assert s.eta_tilde.values[0] == 0.0
    with pytest.raises(GridError):
        N.sample_periodic(2, 16, 8)


def test_with_drift_is_exact_and_repeatable():
    base = N.sample_bridge(4, 32)
    d = N.with_drift(base, 0.25)
    assert d.sigma == 0.25
    assert d.eta_tilde == base.eta_tilde
    assert np.allclose(d.eta.values, base.eta.values + 0.25 * nodes(32))
    assert N.with_drift(d, 0.25).eta_tilde == N.with_drift(d, 0.25).eta_tilde


def test_constant_noise():
    c = N.constant_noise(16, 2.0)
    assert np.all(c.eta_tilde.values == 0.0)
    assert np.allclose(c.eta.values, 2.0 * nodes(16))
    assert np.allclose(N.mollified_xi(c, 1e-3).values, 2.0)


def test_eta_must_vanish_at_zero():
    with pytest.raises(GridError):
        N.NoiseSample(GridFunction(np.ones(8)))


def test_heat_multiplier_single_mode_exact():
    # a periodic mode is an eigenfunction of the heat multiplier
    n, eps = 64, 1e-3
    x = nodes(n)
    eta = np.sqrt(2) * np.sin(TWO_PI * x) / TWO_PI
    s = N.from_eta(eta, 0.0)
    xi = N.mollified_xi(s, eps).values
    exact = np.exp(-eps * TWO_PI**2) * np.sqrt(2) * np.cos(TWO_PI * x)
    assert np.max(np.abs(xi - exact)) < 1e-13


def test_mollified_xi_odd_mode_against_naive_dft():
    n, eps = 32, 1e-3
    s = N.sample_bridge(0, n, 3)
    v = s.eta_tilde.values
    j = np.arange(n)
    k = np.fft.fftfreq(n, 1.0 / n)
    coeff = np.array([np.sum(v * np.exp(-2j * np.pi * kk * j / n)) / n for kk in k])
    mult = np.exp(-eps * (TWO_PI * k) ** 2) * 2j * np.pi * k
    mult[n // 2] = 0.0
    naive = np.array([np.sum(coeff * mult * np.exp(2j * np.pi * k * jj / n)) for jj in j]).real
    assert np.max(np.abs(N.mollified_xi(s, eps).values - naive)) < 1e-10


def test_mollify_preserves_zero_and_sigma():
    s = N.with_drift(N.sample_bridge(1, 64), 0.3)
    m = N.mollify(s, 1e-3)
    assert m.eta_tilde.values[0] == 0.0
    assert m.sigma == 0.3
    assert m.eps == 1e-3
    assert N.mollify(s, 0.0) is s
    with pytest.raises(GridError):
        N.mollify(s, -1.0)


def test_mollified_xi_integrates_to_sigma():
    s = N.with_drift(N.sample_bridge(8, 128), -0.7)
    assert integrate(N.mollified_xi(s, 1e-3)) == pytest.approx(-0.7, abs=1e-13)


def test_mollification_converges_for_smooth_noise():
    s = N.sample_periodic(1, 128, 3)
    errs = [np.max(np.abs(N.mollify(s, e).eta_tilde.values - s.eta_tilde.values)) for e in (1e-4, 1e-5)]
    assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.1)


def test_save_load_round_trip(tmp_path):
    s = N.with_drift(N.sample_bridge(12, 32, 8), 0.1)
    header, csv = N.save(s, tmp_path)
    back = N.load(header, csv)
    assert back.eta_tilde == s.eta_tilde and back.sigma == s.sigma
    p = N.sample_periodic(3, 32, 2)
    h2, _ = N.save(p, tmp_path, "p")
    assert N.load(h2).eta_tilde == p.eta_tilde


def test_custom_noise_needs_csv(tmp_path):
    x = nodes(16)
    s = N.from_eta(0.1 * np.sin(TWO_PI * x) + 0.5 * x, 0.5)
    header, csv = N.save(s, tmp_path)
    with pytest.raises(GridError):
        N.load(header)
    back = N.load(header, csv)
    assert np.allclose(back.eta_tilde.values, s.eta_tilde.values, atol=1e-15)
    with pytest.raises(GridError):
        N.reconstruct(s.header())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63 - 1), st.sampled_from([16, 32, 64]))
def test_reconstruct_from_header_is_bit_exact(seed, n):
    s = N.mollify(N.with_drift(N.sample_bridge(seed, n), 0.05), 1e-3)
    back = N.reconstruct(s.header())
    assert back.eta_tilde == s.eta_tilde and back.sigma == s.sigma
