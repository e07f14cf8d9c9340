"""Dirichlet energy ``Phi_theta(f) = 1/2 int (f')^2 theta`` and its constants.

Two discretizations are offered. ``method="spectral"`` uses FFT derivatives.
``method="fd"`` is the conservative three-point form the implicit solver is
built on: with face weights ``theta_{j+1/2} = (theta_j + theta_{j+1}) / 2``,

    Phi_h(f) = 1/2 sum_j theta_{j+1/2} ((f_{j+1} - f_j) / dx)^2 dx,

and ``-theta^{-1} A_theta f`` is its exact gradient in ``L^2_theta``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .coefficients import CoefficientFunction
from .grid import DerivativeMethod, GridError, GridFunction, check_same_grid, derivative_array


def _positive(theta: GridFunction) -> np.ndarray:
    if np.any(theta.values <= 0.0):
        raise GridError("theta must be strictly positive")
    return theta.values


def face_weights(theta: np.ndarray) -> np.ndarray:
    """``theta`` averaged onto the faces ``j + 1/2``."""
    return 0.5 * (theta + np.roll(theta, -1))


def weighted_laplacian(f: np.ndarray, theta_face: np.ndarray) -> np.ndarray:
    """Conservative ``(theta f')'`` with face weights; sums to zero exactly in exact arithmetic."""
    n = f.size
    flux = theta_face * (np.roll(f, -1) - f) * n
    return (flux - np.roll(flux, 1)) * n


def energy(f: GridFunction, theta: GridFunction, method: DerivativeMethod = "spectral") -> float:
    check_same_grid(f, theta)
    th = _positive(theta)
    if method == "fd":
        n = f.n
        jump = (np.roll(f.values, -1) - f.values) * n
        return float(0.5 * np.mean(face_weights(th) * jump * jump))
    d = derivative_array(f.values, 1, method)
    return float(0.5 * np.mean(d * d * th))


def energy_gradient(f: GridFunction, theta: GridFunction, method: DerivativeMethod = "spectral") -> GridFunction:
    """``DPhi(x, f) = -theta^{-1} (theta f')'``."""
    check_same_grid(f, theta)
    th = _positive(theta)
    if method == "fd":
        return GridFunction(-weighted_laplacian(f.values, face_weights(th)) / th)
    inner = th * derivative_array(f.values, 1, "spectral")
    return GridFunction(-derivative_array(inner, 1, "spectral") / th)


def grad_norm_sq(f: GridFunction, theta: GridFunction, method: DerivativeMethod = "spectral") -> float:
    """``||DPhi(., f)||^2`` in ``L^2_theta``."""
    g = energy_gradient(f, theta, method).values
    return float(np.mean(g * g * theta.values))


def poincare_constant(theta: GridFunction) -> float:
    """``c_2(theta) = 1/2 int theta^{-1} int theta``."""
    th = _positive(theta)
    return float(0.5 * np.mean(1.0 / th) * np.mean(th))


def verify_poincare(
    f: GridFunction, theta: GridFunction, method: DerivativeMethod = "spectral"
) -> tuple[float, float]:
    """Both sides of ``Phi(f) <= c_2(theta) ||DPhi||^2``; the caller compares them."""
    lhs = energy(f, theta, method)
    rhs = poincare_constant(theta) * grad_norm_sq(f, theta, method)
    return lhs, rhs


def c_of_theta(theta: GridFunction) -> float:
    """``(min theta)^{-2}`` with the minimum taken over grid nodes."""
    return float(np.min(_positive(theta))) ** -2


def c1_constant(coeff: CoefficientFunction, theta: GridFunction) -> float:
    return coeff.c_plus * float(np.sqrt(2.0 * c_of_theta(theta)))


def decay_rate_bound(coeff: CoefficientFunction, theta: GridFunction, mu: float) -> tuple[float, float]:
    """``(C(theta), c_*)``: the energy growth bound and the mu = 0 rate ``c_- / c_2``."""
    c2 = poincare_constant(theta)
    c1 = c1_constant(coeff, theta)
    bound = -coeff.c_minus / (2.0 * c2) + mu * mu * c1 * c1 / (2.0 * coeff.c_minus)
    return float(bound), coeff.c_minus / c2


def norm_equivalence_constant(theta: GridFunction) -> float:
    """``sqrt(max theta / min theta)``: bound on ``||f - z_m|| / ||f'||`` in ``L^2_theta`` under conservation."""
    th = _positive(theta)
    return float(np.sqrt(th.max() / th.min()))


@dataclass(frozen=True)
class EnergyDiagnostics:
    phi_value: float
    grad_norm_sq: float
    c1: float
    c2: float
    c_of_theta: float
    C_theta: float
    c_star: float | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def diagnostics(
    f: GridFunction,
    theta: GridFunction,
    coeff: CoefficientFunction,
    mu: float,
    method: DerivativeMethod = "spectral",
) -> EnergyDiagnostics:
    bound, fast = decay_rate_bound(coeff, theta, mu)
    if mu == 0.0:
        c_star = fast
    elif bound < 0.0:
        c_star = -bound
    else:
        c_star = None
    return EnergyDiagnostics(
        phi_value=energy(f, theta, method),
        grad_norm_sq=grad_norm_sq(f, theta, method),
        c1=c1_constant(coeff, theta),
        c2=poincare_constant(theta),
        c_of_theta=c_of_theta(theta),
        C_theta=bound,
        c_star=c_star,
    )
