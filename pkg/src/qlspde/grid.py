"""Uniform periodic grids on the torus [0, 1).

A :class:`GridFunction` stores ``n`` samples ``values[j] = g(j / n)``; the
periodic extension is implied by index arithmetic and never stored twice.

Derivatives are spectral (FFT) by default, with a second-order central
difference mode kept for cross-checks against the finite-volume solver.
Quadrature is the rectangle rule, which is exact for trigonometric
polynomials below the Nyquist mode.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

MIN_POINTS = 8

DerivativeMethod = Literal["spectral", "fd"]


class GridError(ValueError):
    """Invalid grid data or incompatible grids."""


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real function sampled on the uniform periodic grid ``x_j = j / n``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 1:
            raise GridError(f"values must be one-dimensional, got shape {arr.shape}")
        if arr.size < MIN_POINTS:
            raise GridError(f"grid needs at least {MIN_POINTS} points, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise GridError("grid values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return nodes(self.n)

    @classmethod
    def from_function(cls, func, n: int) -> GridFunction:
        return cls(func(nodes(n)))

    @classmethod
    def constant(cls, value: float, n: int) -> GridFunction:
        return cls(np.full(n, float(value)))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"GridFunction(n={self.n}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def _coerce(self, other) -> np.ndarray | float:
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other) -> GridFunction:
        return GridFunction(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> GridFunction:
        return GridFunction(self.values - self._coerce(other))

    def __rsub__(self, other) -> GridFunction:
        return GridFunction(self._coerce(other) - self.values)

    def __mul__(self, other) -> GridFunction:
        return GridFunction(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> GridFunction:
        return GridFunction(self.values / self._coerce(other))

    def __neg__(self) -> GridFunction:
        return GridFunction(-self.values)

    def map(self, func) -> GridFunction:
        return GridFunction(func(self.values))


def nodes(n: int) -> np.ndarray:
    """Grid nodes ``j / n`` for ``j = 0..n-1``."""
    return np.arange(n, dtype=np.float64) / n


def check_same_grid(*funcs: GridFunction) -> int:
    sizes = {g.n for g in funcs}
    if len(sizes) != 1:
        raise GridError(f"grid size mismatch: {sorted(sizes)}")
    return sizes.pop()


def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers matching ``numpy.fft.rfft`` output ordering."""
    return np.arange(n // 2 + 1, dtype=np.float64)


def _as_array(g: GridFunction | np.ndarray) -> np.ndarray:
    if isinstance(g, GridFunction):
        return g.values
    arr = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise GridError("non-finite input")
    return arr


def spectral_multiplier(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier given on rfft wavenumbers."""
    return np.fft.irfft(np.fft.rfft(values) * multiplier, n=values.size)


def derivative_array(values: np.ndarray, order: int = 1, method: DerivativeMethod = "spectral") -> np.ndarray:
    """Array-level derivative used by the solvers; see :func:`differentiate`."""
    n = values.size
    if order not in (1, 2):
        raise GridError(f"derivative order must be 1 or 2, got {order}")
    if method == "fd":
        if order == 1:
            return (np.roll(values, -1) - np.roll(values, 1)) * (0.5 * n)
        return (np.roll(values, -1) - 2.0 * values + np.roll(values, 1)) * float(n * n)
    if method != "spectral":
        raise GridError(f"unknown derivative method {method!r}")
    ik = 2j * np.pi * wavenumbers(n)
    mult = ik**order
    if order % 2 == 1 and n % 2 == 0:
        # odd derivatives of the Nyquist mode are not representable on the grid
        mult[-1] = 0.0
    return spectral_multiplier(values, mult)


def differentiate(g: GridFunction, order: int = 1, method: DerivativeMethod = "spectral") -> GridFunction:
    """Derivative of order 1 or 2 on the torus."""
    return GridFunction(derivative_array(g.values, order, method))


def integrate(g: GridFunction | np.ndarray) -> float:
    """Integral over the torus by the rectangle rule."""
    return float(np.mean(_as_array(g)))


def cumulative_integral(g: GridFunction) -> np.ndarray:
    """Values of ``x -> int_0^x g`` at the grid nodes.

    The result is not periodic when ``g`` has nonzero mean, so a plain array
    is returned. Exact for the trigonometric interpolant of ``g``.
    """
    n = g.n
    coeffs = np.fft.rfft(g.values)
    mean = coeffs[0].real / n
    k = wavenumbers(n)
    anti = np.zeros_like(coeffs)
    anti[1:] = coeffs[1:] / (2j * np.pi * k[1:])
    if n % 2 == 0:
        anti[-1] = 0.0
    periodic = np.fft.irfft(anti, n=n)
    return mean * nodes(n) + periodic - periodic[0]


def shift_half(g: GridFunction | np.ndarray) -> np.ndarray:
    """Trigonometric interpolant evaluated at the midpoints ``(j + 1/2) / n``."""
    values = _as_array(g)
    n = values.size
    phase = np.exp(1j * np.pi * wavenumbers(n) / n)
    if n % 2 == 0:
        # keep the Nyquist mode real: cos(pi n x) vanishes at midpoints
        phase[-1] = 0.0
    return spectral_multiplier(values, phase)


def spectral_energy(g: GridFunction) -> float:
    """``int g^2`` evaluated from Fourier coefficients (Parseval)."""
    n = g.n
    c = np.fft.rfft(g.values) / n
    total = np.abs(c[0]) ** 2 + 2.0 * np.sum(np.abs(c[1:]) ** 2)
    if n % 2 == 0:
        total -= np.abs(c[-1]) ** 2
    return float(total)


NormKind = Literal["L2", "L2_weighted", "H1", "H1_weighted", "Linf", "holder"]


def _check_weight(g: GridFunction, weight: GridFunction | None) -> np.ndarray:
    if weight is None:
        raise GridError("weighted norm requires a weight")
    check_same_grid(g, weight)
    if np.any(weight.values <= 0.0):
        raise GridError("weight must be strictly positive")
    return weight.values


def holder_estimate(g: GridFunction, exponent: float) -> float:
    """Discrete Hölder estimator of exponent ``beta``.

    Returns ``sup|g| + max_h max_x |g(x+h) - g(x)| / h**beta`` over the dyadic
    lags ``h = 2**k * dx`` with ``h <= 1/2``. This is an estimator on the
    grid, not the continuum Hölder-Besov norm.
    """
    if not 0.0 < exponent < 1.0:
        raise GridError(f"Hölder exponent must lie in (0, 1), got {exponent}")
    v = g.values
    n = g.n
    best = 0.0
    shift = 1
    while shift <= n // 2:
        h = shift / n
        incr = np.max(np.abs(np.roll(v, -shift) - v))
        best = max(best, incr / h**exponent)
        shift *= 2
    return float(np.max(np.abs(v)) + best)


def norm(
    g: GridFunction,
    kind: NormKind = "L2",
    *,
    weight: GridFunction | None = None,
    exponent: float | None = None,
    method: DerivativeMethod = "spectral",
) -> float:
    """Norms used throughout the package.

    ``kind`` is one of ``L2``, ``L2_weighted``, ``H1``, ``H1_weighted``,
    ``Linf`` or ``holder``. Weighted kinds need ``weight``; ``holder`` needs
    ``exponent``.
    """
    v = g.values
    if kind == "L2":
        return float(np.sqrt(np.mean(v * v)))
    if kind == "L2_weighted":
        w = _check_weight(g, weight)
        return float(np.sqrt(np.mean(v * v * w)))
    if kind == "Linf":
        return float(np.max(np.abs(v)))
    if kind == "H1":
        d = derivative_array(v, 1, method)
        return float(np.sqrt(np.mean(v * v) + np.mean(d * d)))
    if kind == "H1_weighted":
        w = _check_weight(g, weight)
        d = derivative_array(v, 1, method)
        return float(np.sqrt(np.mean((v * v + d * d) * w)))
    if kind == "holder":
        if exponent is None:
            raise GridError("holder norm requires an exponent")
        return holder_estimate(g, exponent)
    raise GridError(f"unknown norm kind {kind!r}")


# --- serialization -------------------------------------------------------

_BINARY_MAGIC = b"QLGF"
_HEADER = struct.Struct("<4sQ")


def to_csv(g: GridFunction, path: str | Path | None = None, header: tuple[str, str] = ("x", "value")) -> str:
    """Two-column CSV; floats are written with ``repr`` so they round-trip exactly."""
    buf = io.StringIO()
    buf.write(f"{header[0]},{header[1]}\n")
    for xj, vj in zip(g.x, g.values):
        buf.write(f"{float(xj)!r},{float(vj)!r}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def from_csv(source: str | Path) -> GridFunction:
    """Read a CSV produced by :func:`to_csv` (path or CSV text)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GridError("empty CSV")
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) < 2:
            raise GridError(f"line {lineno}: expected two columns")
        try:
            values.append(float(parts[1]))
        except ValueError as exc:
            raise GridError(f"line {lineno}: {exc}") from None
    return GridFunction(np.array(values))


def to_bytes(g: GridFunction) -> bytes:
    """Compact binary container: magic, ``n`` as uint64, little-endian doubles."""
    return _HEADER.pack(_BINARY_MAGIC, g.n) + g.values.astype("<f8").tobytes()


def from_bytes(data: bytes) -> GridFunction:
    if len(data) < _HEADER.size:
        raise GridError("truncated binary grid function")
    magic, n = _HEADER.unpack_from(data)
    if magic != _BINARY_MAGIC:
        raise GridError("bad magic in binary grid function")
    expected = _HEADER.size + 8 * n
    if len(data) != expected:
        raise GridError(f"binary length {len(data)} does not match n={n}")
    return GridFunction(np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64))


def write_binary(g: GridFunction, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(g))


def read_binary(path: str | Path) -> GridFunction:
    return from_bytes(Path(path).read_bytes())
