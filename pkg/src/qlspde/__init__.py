"""Numerics for the conservative quasilinear equation ``v_t = (phi(v)' + phi(v) xi)'`` on the torus."""

from __future__ import annotations

__version__ = "0.1.0"

from .coefficients import CoefficientFunction
from .grid import GridFunction
from .noise import NoiseSample
from .solver import SimConfig, Trajectory, evolve
from .stationary import StationaryProfile, build_theta, solve_zm, stationary_profile

__all__ = [
    "CoefficientFunction",
    "GridFunction",
    "NoiseSample",
    "SimConfig",
    "StationaryProfile",
    "Trajectory",
    "build_theta",
    "evolve",
    "solve_zm",
    "stationary_profile",
]
