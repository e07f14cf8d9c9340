"""Stationary profile ``theta``, drift constant ``mu`` and the stationary states.

For noise with integral ``eta`` and mean ``sigma``::

    mu    = (e^{sigma} - 1) / int_0^1 e^{eta}
    theta = e^{-eta(x)} (mu int_0^x e^{eta} + 1)

``theta`` is positive and periodic with ``theta(0) = 1`` and solves
``theta' + xi theta = mu`` for continuous noise. For a mass ``m`` the scalar
``z_m`` solves ``int phi^{-1}(z_m theta) = m`` and ``phi^{-1}(z_m theta)`` is
the stationary solution with that mass.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from scipy.optimize import brentq

from . import energy as _energy
from .coefficients import CoefficientFunction
from .grid import GridError, GridFunction, check_same_grid, derivative_array, integrate, nodes
from .noise import NoiseSample

OVERFLOW_LIMIT = 300.0

Quadrature = Literal["spectral", "trapezoid"]


class StationaryError(ArithmeticError):
    pass


def _guard(eta: np.ndarray, sigma: float) -> None:
    worst = max(float(np.max(np.abs(eta))), abs(sigma))
    if worst > OVERFLOW_LIMIT:
        raise StationaryError(f"|eta| reaches {worst:.1f} > {OVERFLOW_LIMIT}; e^eta would overflow")


def build_theta(noise: NoiseSample, quadrature: Quadrature = "spectral") -> tuple[GridFunction, float]:
    """Return ``(theta, mu)`` for a noise sample.

    ``quadrature="spectral"`` integrates the trigonometric interpolant of
    ``e^{eta_tilde}`` against ``e^{sigma y}`` exactly, which reduces the
    construction to ``theta = e^{-eta_tilde} Q / Q(0)`` and ``mu = 1 / Q(0)``
    with ``Q`` the periodic part of the antiderivative. ``"trapezoid"``
    accumulates the trapezoid rule from the left, with ``e^{sigma}`` as the
    right endpoint value; it is second order.
    """
    n = noise.n
    tilde = noise.eta_tilde.values
    sigma = noise.sigma
    _guard(tilde + sigma * nodes(n), sigma)

    if quadrature == "trapezoid":
        eta = noise.eta.values
        g = np.exp(eta)
        dx = 1.0 / n
        cum = np.concatenate(([0.0], np.cumsum(0.5 * dx * (g[:-1] + g[1:]))))
        total = cum[-1] + 0.5 * dx * (g[-1] + np.exp(sigma))
        mu = (np.exp(sigma) - 1.0) / total
        theta = np.exp(-eta) * (mu * cum + 1.0)
        return GridFunction(theta), float(mu)
    if quadrature != "spectral":
        raise GridError(f"unknown quadrature {quadrature!r}")

    if sigma == 0.0:
        return GridFunction(np.exp(-tilde)), 0.0
    p_hat = np.fft.fft(np.exp(tilde)) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    q_hat = p_hat / (sigma + 2j * np.pi * k)
    if n % 2 == 0:
        # split the Nyquist coefficient evenly between +n/2 and -n/2
        q_hat[n // 2] = p_hat[n // 2] * sigma / (sigma**2 + (np.pi * n) ** 2)
    q = (np.fft.ifft(q_hat) * n).real
    q0 = float(np.sum(q_hat).real)
    theta = np.exp(-tilde) * q / q0
    theta[0] = 1.0
    return GridFunction(theta), 1.0 / q0


def residual_theta(theta: GridFunction, mu: float, xi: GridFunction) -> float:
    """``sup |theta' + xi theta - mu|`` with a spectral derivative."""
    check_same_grid(theta, xi)
    r = derivative_array(theta.values, 1) + xi.values * theta.values - mu
    return float(np.max(np.abs(r)))


def mass_of(coeff: CoefficientFunction, theta: GridFunction, z: float) -> float:
    return integrate(coeff.inverse(z * theta.values))


def solve_zm(coeff: CoefficientFunction, theta: GridFunction, m: float, tol: float = 1e-10) -> float:
    """The unique ``z`` with ``int phi^{-1}(z theta) = m``.

    ``z -> int phi^{-1}(z theta)`` is strictly increasing, so a bracket is
    grown geometrically around a first guess and refined with Brent's method.
    """
    th = theta.values
    if np.any(th <= 0.0):
        raise GridError("theta must be strictly positive")

    def excess(z: float) -> float:
        return mass_of(coeff, theta, z) - m

    guess = float(coeff.phi(np.array([m]))[0]) / float(np.mean(th))
    width = 1.0 + abs(guess)
    lo, hi = guess - width, guess + width
    f_lo, f_hi = excess(lo), excess(hi)
    for _ in range(200):
        if f_lo <= 0.0 <= f_hi:
            break
        if f_lo > 0.0:
            lo -= width
            f_lo = excess(lo)
        if f_hi < 0.0:
            hi += width
            f_hi = excess(hi)
        width *= 2.0
    else:
        raise StationaryError(f"could not bracket z for m={m} with {coeff.name}")
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    z = brentq(excess, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=500)
    err = abs(excess(z))
    if err > tol:
        raise StationaryError(f"z_m solve missed the mass by {err:.3e} (tol {tol:.1e})")
    return float(z)


def stationary_profile(coeff: CoefficientFunction, theta: GridFunction, z: float) -> GridFunction:
    """``v_bar = phi^{-1}(z theta)``."""
    if np.any(theta.values <= 0.0):
        raise GridError("theta must be strictly positive")
    return GridFunction(coeff.inverse(z * theta.values))


def mu_smallness_threshold(coeff: CoefficientFunction, theta: GridFunction) -> float:
    """Positive root ``mu*`` of ``C(theta) = 0``: ``c_- / (c_1 sqrt(c_2))``."""
    c1 = _energy.c1_constant(coeff, theta)
    c2 = _energy.poincare_constant(theta)
    return coeff.c_minus / (c1 * np.sqrt(c2))


@dataclass
class StationaryProfile:
    """``theta``, ``mu`` and a per-mass cache of ``(z_m, v_bar_m)``."""

    theta: GridFunction
    mu: float
    coeff: CoefficientFunction
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def from_noise(cls, noise: NoiseSample, coeff: CoefficientFunction, quadrature: Quadrature = "spectral"):
        theta, mu = build_theta(noise, quadrature)
        return cls(theta, mu, coeff)

    def for_mass(self, m: float) -> tuple[float, GridFunction]:
        key = float(m)
        with self._lock:
            if key not in self._cache:
                z = solve_zm(self.coeff, self.theta, key)
                self._cache[key] = (z, stationary_profile(self.coeff, self.theta, z))
            return self._cache[key]

    def summary(self, m: float) -> dict:
        z, _ = self.for_mass(m)
        bound, _ = _energy.decay_rate_bound(self.coeff, self.theta, self.mu)
        return {
            "m": float(m),
            "mu": self.mu,
            "z_m": z,
            "c1": _energy.c1_constant(self.coeff, self.theta),
            "c2": _energy.poincare_constant(self.theta),
            "C_theta": bound,
            "mu_star": mu_smallness_threshold(self.coeff, self.theta),
        }

    def export(self, directory: str | Path, m: float, stem: str = "stationary") -> tuple[Path, Path]:
        """Write ``<stem>.csv`` (x, theta, v_bar) and ``<stem>.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _, v_bar = self.for_mass(m)
        csv_path = directory / f"{stem}.csv"
        lines = ["x,theta,v_bar"]
        for xj, tj, vj in zip(self.theta.x, self.theta.values, v_bar.values):
            lines.append(f"{float(xj)!r},{float(tj)!r},{float(vj)!r}")
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        json_path = directory / f"{stem}.json"
        json_path.write_text(json.dumps(self.summary(m), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return csv_path, json_path


# --- separable stationary equation for general chi (mu = 0) ----------------

_GK_X = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_GK_WK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_GK_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)


def _gauss_kronrod(fun: Callable[[np.ndarray], np.ndarray], a: float, b: float, tol: float, depth: int = 0) -> float:
    """Adaptive 7/15-point Gauss-Kronrod with vectorized node evaluation."""
    if a == b:
        return 0.0
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    x = np.concatenate((c - h * _GK_X, c + h * _GK_X[-2::-1]))
    y = fun(x)
    left, mid, right = y[:7], y[7], y[8:][::-1]
    kronrod = h * (np.dot(_GK_WK[:7], left + right) + _GK_WK[7] * mid)
    gauss = h * (np.dot(_GK_WG[:3], left[1::2] + right[1::2]) + _GK_WG[3] * mid)
    if abs(kronrod - gauss) <= max(tol, 1e-15 * abs(kronrod)) or depth > 40:
        return float(kronrod)
    return _gauss_kronrod(fun, a, c, 0.5 * tol, depth + 1) + _gauss_kronrod(fun, c, b, 0.5 * tol, depth + 1)


class _PsiInverse:
    """Inverse of ``Psi(t) = int_{t_ref}^t ds / psi(s)`` built from cached knots."""

    def __init__(self, psi: Callable[[np.ndarray], np.ndarray], t_ref: float, tol: float):
        self.psi = psi
        self.tol = tol
        self.knots_t = [t_ref]
        self.knots_s = [0.0]
        self._check(np.array([t_ref]))

    def _check(self, t: np.ndarray) -> np.ndarray:
        val = self.psi(t)
        if np.any(~np.isfinite(val)) or np.any(val <= 0.0):
            raise StationaryError("psi must be positive on the range needed by the separable solve")
        return val

    def _recip(self, t: np.ndarray) -> np.ndarray:
        return 1.0 / self._check(t)

    def _integral(self, a: float, b: float) -> float:
        return _gauss_kronrod(self._recip, a, b, self.tol)

    def _extend(self, target: float) -> None:
        upward = target > self.knots_s[-1]
        t0 = self.knots_t[-1] if upward else self.knots_t[0]
        s0 = self.knots_s[-1] if upward else self.knots_s[0]
        step = max(1.0, abs(t0))
        for _ in range(400):
            cand = t0 + step if upward else t0 - step
            try:
                self._check(np.array([cand]))
                s = s0 + self._integral(t0, cand)
            except StationaryError:
                step *= 0.5
                if step < 1e-300:
                    break
                continue
            if upward:
                self.knots_t.append(cand)
                self.knots_s.append(s)
                if s >= target:
                    return
            else:
                self.knots_t.insert(0, cand)
                self.knots_s.insert(0, s)
                if s <= target:
                    return
            t0, s0 = cand, s
            step *= 2.0
        raise StationaryError(f"target {target:.6g} lies outside the range of Psi")

    def __call__(self, target: float) -> float:
        if target > self.knots_s[-1] or target < self.knots_s[0]:
            self._extend(target)
        i = int(np.searchsorted(self.knots_s, target))
        i = min(max(i, 1), len(self.knots_s) - 1)
        a, b = self.knots_t[i - 1], self.knots_t[i]
        sa = self.knots_s[i - 1]
        lo, hi = a, b
        t = a + (b - a) * (target - sa) / max(self.knots_s[i] - sa, 1e-300)
        for _ in range(100):
            r = sa + self._integral(a, t) - target
            if abs(r) <= self.tol:
                break
            if r < 0.0:
                lo = t
            else:
                hi = t
            step = t - r * float(self._check(np.array([t]))[0])
            t = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 4e-16 * max(1.0, abs(t)):
                break
        else:
            raise StationaryError(f"Psi inverse did not converge for target {target:.6g}")
        j = int(np.searchsorted(self.knots_t, t))
        self.knots_t.insert(j, t)
        self.knots_s.insert(j, target)
        return t


def separable_stationary(
    coeff: CoefficientFunction,
    chi: CoefficientFunction | Callable[[np.ndarray], np.ndarray],
    noise: NoiseSample,
    C: float,
    theta_ref: float = 1.0,
    tol: float = 1e-13,
) -> GridFunction:
    """Solve ``theta' + psi(theta) xi = 0`` with ``psi(t) = chi(phi^{-1}(t))``.

    Returns ``theta_C = Psi^{-1}(-eta + C)`` where ``Psi`` is the antiderivative
    of ``1 / psi`` normalized by ``Psi(theta_ref) = 0``. Requires ``sigma = 0``
    so that the result is periodic.
    """
    if noise.sigma != 0.0:
        raise StationaryError("the separable construction needs sigma = 0 (mu = 0)")
    chi_map = chi.phi if isinstance(chi, CoefficientFunction) else chi

    def psi(t: np.ndarray) -> np.ndarray:
        return chi_map(coeff.inverse(np.asarray(t, dtype=np.float64)))

    inverse = _PsiInverse(psi, theta_ref, tol)
    targets = -noise.eta.values + C
    order = np.argsort(targets, kind="stable")
    out = np.empty_like(targets)
    for idx in order:
        out[idx] = inverse(float(targets[idx]))
    return GridFunction(out)
