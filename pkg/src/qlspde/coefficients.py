"""Uniformly elliptic nonlinearities ``phi`` with ``c_- <= phi' <= c_+``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray
ScalarMap = Callable[[Array], Array]


class CoefficientError(ValueError):
    pass


class InverseError(ArithmeticError):
    """The monotone inverse solve did not converge."""


@dataclass(frozen=True)
class CoefficientFunction:
    name: str
    phi: ScalarMap
    dphi: ScalarMap
    d2phi: ScalarMap
    c_minus: float
    c_plus: float
    params: dict = field(default_factory=dict)
    exact_inverse: ScalarMap | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.c_minus <= self.c_plus:
            raise CoefficientError(f"need 0 < c_minus <= c_plus, got {self.c_minus}, {self.c_plus}")

    def spec(self) -> dict:
        return {"name": self.name, **self.params}

    def inverse(self, y, guess=None, tol: float = 1e-12, max_iter: int = 100) -> Array:
        """Solve ``phi(v) = y`` elementwise.

        Newton's method safeguarded by bisection inside the bracket implied
        by the ellipticity bounds: with ``d = y - phi(0)``, the root lies
        between ``d / c_plus`` and ``d / c_minus``.
        """
        y = np.asarray(y, dtype=np.float64)
        if self.exact_inverse is not None:
            return self.exact_inverse(y)
        d = y - float(self.phi(np.zeros(1))[0])
        lo = np.minimum(d / self.c_plus, d / self.c_minus)
        hi = np.maximum(d / self.c_plus, d / self.c_minus)
        v = np.clip(np.asarray(guess, dtype=np.float64), lo, hi) if guess is not None else d / (0.5 * (self.c_minus + self.c_plus))
        v = np.array(v, dtype=np.float64, copy=True)
        scale = np.maximum(1.0, np.abs(y))
        for _ in range(max_iter):
            r = self.phi(v) - y
            done = np.abs(r) <= tol * scale
            if np.all(done):
                return v
            lo = np.where(r < 0.0, v, lo)
            hi = np.where(r > 0.0, v, hi)
            step = v - r / self.dphi(v)
            outside = (step <= lo) | (step >= hi)
            v = np.where(done, v, np.where(outside, 0.5 * (lo + hi), step))
            if np.all((hi - lo) <= 4e-16 * np.maximum(1.0, np.abs(v))):
                return v
        r = self.phi(v) - y
        if np.any(np.abs(r) > 1e3 * tol * scale):
            raise InverseError(f"inverse of {self.name} did not converge; max residual {np.max(np.abs(r)):.3e}")
        return v

    def check_ellipticity(self, radius: float = 50.0, samples: int = 20001) -> tuple[float, float]:
        """Observed ``(min phi', max phi')`` on ``[-radius, radius]``; raises if bounds fail."""
        v = np.linspace(-radius, radius, samples)
        d = self.dphi(v)
        lo, hi = float(d.min()), float(d.max())
        if lo < self.c_minus * (1 - 1e-12) or hi > self.c_plus * (1 + 1e-12):
            raise CoefficientError(
                f"{self.name}: phi' range [{lo}, {hi}] violates [{self.c_minus}, {self.c_plus}]"
            )
        return lo, hi


def linear(slope: float = 1.0, offset: float = 0.0) -> CoefficientFunction:
    """``phi(v) = slope * v + offset``."""
    if slope <= 0:
        raise CoefficientError("slope must be positive")
    return CoefficientFunction(
        "linear",
        lambda v: slope * np.asarray(v, dtype=np.float64) + offset,
        lambda v: np.full(np.shape(v), slope, dtype=np.float64),
        lambda v: np.zeros(np.shape(v)),
        slope,
        slope,
        {"slope": slope, "offset": offset},
        exact_inverse=lambda y: (np.asarray(y, dtype=np.float64) - offset) / slope,
    )


def sine(amplitude: float = 0.5, offset: float = 0.0) -> CoefficientFunction:
    """``phi(v) = v + a sin(v) + offset`` with ``c_- = 1 - a``, ``c_+ = 1 + a``."""
    if not 0.0 <= amplitude < 1.0:
        raise CoefficientError("sine amplitude must lie in [0, 1)")
    a = amplitude
    return CoefficientFunction(
        "sine",
        lambda v: v + a * np.sin(v) + offset,
        lambda v: 1.0 + a * np.cos(v),
        lambda v: -a * np.sin(v),
        1.0 - a,
        1.0 + a,
        {"amplitude": amplitude, "offset": offset},
    )


def arctan(strength: float = 1.0, offset: float = 0.0) -> CoefficientFunction:
    """``phi(v) = v + b arctan(v) + offset`` with ``c_- = 1``, ``c_+ = 1 + b``."""
    if strength < 0.0:
        raise CoefficientError("arctan strength must be nonnegative")
    b = strength
    return CoefficientFunction(
        "arctan",
        lambda v: v + b * np.arctan(v) + offset,
        lambda v: 1.0 + b / (1.0 + np.asarray(v) ** 2),
        lambda v: -2.0 * b * np.asarray(v) / (1.0 + np.asarray(v) ** 2) ** 2,
        1.0,
        1.0 + b,
        {"strength": strength, "offset": offset},
    )


REGISTRY: dict[str, Callable[..., CoefficientFunction]] = {
    "linear": linear,
    "sine": sine,
    "arctan": arctan,
}


def from_spec(spec: dict) -> CoefficientFunction:
    """Build from ``{"name": ..., **params}``; unknown names or parameters raise."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in REGISTRY:
        raise CoefficientError(f"unknown coefficient {name!r}; choose from {sorted(REGISTRY)}")
    try:
        return REGISTRY[name](**spec)
    except TypeError as exc:
        raise CoefficientError(f"bad parameters for {name!r}: {exc}") from None
