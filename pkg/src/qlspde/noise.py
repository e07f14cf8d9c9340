"""Spatial noise realizations represented through their integral.

The noise ``xi = w' + sigma`` is a distribution, so it is never stored
pointwise. A :class:`NoiseSample` keeps the periodic part
``eta_tilde(x) = eta(x) - sigma * x`` of the integral ``eta(x) = <xi, 1_[0,x]>``
together with the mean ``sigma``. Smooth approximants come from a heat-kernel
Fourier multiplier applied to ``eta_tilde``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridError, GridFunction, from_csv, nodes, spectral_multiplier, to_csv, wavenumbers

# sub-stream identifiers combined with the run seed by XOR
STREAM_NOISE = 0
STREAM_INITIAL = 1
STREAM_AUX = 2

_MASK64 = (1 << 64) - 1


def substream_seed(seed: int, stream: int) -> int:
    """Derived seed for an independent stream: ``seed XOR stream``."""
    return (int(seed) ^ int(stream)) & _MASK64


@dataclass(frozen=True)
class NoiseSample:
    """A noise realization.

    ``eta_tilde`` is the periodic part of the integral, ``sigma`` the mean of
    the noise. ``seed``/``kl_modes`` are ``None`` for noise that was not drawn
    by :func:`sample_bridge`. ``eps`` records the mollification scale applied.
    """

    eta_tilde: GridFunction
    sigma: float = 0.0
    seed: int | None = None
    kl_modes: int | None = None
    kind: str = "bridge"
    eps: float = 0.0

    def __post_init__(self) -> None:
        if self.eta_tilde.values[0] != 0.0:
            raise GridError("eta must vanish at x = 0")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.eta_tilde.n

    @property
    def eta(self) -> GridFunction:
        """Integral ``eta(x) = eta_tilde(x) + sigma * x`` at the grid nodes."""
        return GridFunction(self.eta_tilde.values + self.sigma * nodes(self.n))

    def header(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "n": self.n,
            "kl_modes": self.kl_modes,
            "sigma": self.sigma,
            "eps": self.eps,
        }


def bridge_from_coefficients(z: np.ndarray, n: int) -> np.ndarray:
    """Brownian-bridge Karhunen-Loève sum ``sum_k z_k sqrt(2) sin(k pi x) / (k pi)``."""
    z = np.asarray(z, dtype=np.float64)
    k = np.arange(1, z.size + 1, dtype=np.float64)
    x = nodes(n)
    basis = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k)) / (np.pi * k)
    path = basis @ z
    path[0] = 0.0
    return path


def sample_bridge(seed: int, n: int, kl_modes: int | None = None) -> NoiseSample:
    """Brownian bridge ``w`` on [0, 1] as the integral of ``w'`` (so ``sigma = 0``).

    ``kl_modes`` defaults to ``n // 2``. Coefficients are the first
    ``kl_modes`` draws of ``numpy.random.default_rng(seed)``, so paths with
    more modes refine paths with fewer.
    """
    if n < 8:
        raise GridError(f"n must be at least 8, got {n}")
    if kl_modes is None:
        kl_modes = n // 2
    if not 1 <= kl_modes <= n // 2:
        raise GridError(f"kl_modes must lie in [1, n/2] = [1, {n // 2}], got {kl_modes}")
    z = np.random.default_rng(seed).standard_normal(kl_modes)
    eta = bridge_from_coefficients(z, n)
    return NoiseSample(GridFunction(eta), 0.0, seed=int(seed), kl_modes=int(kl_modes), kind="bridge")


def sample_periodic(seed: int, n: int, modes: int) -> NoiseSample:
    """Truncated Fourier series of a periodic Brownian bridge (a trigonometric polynomial).

    ``eta = sum_{j<=modes} sqrt(2) (a_j sin(2 pi j x) + b_j (cos(2 pi j x) - 1)) / (2 pi j)``
    with standard normal ``a_j, b_j`` drawn in the order ``a_1, b_1, a_2, ...``.
    Smooth and periodic, so heat mollification converges at rate ``eps``.
    """
    if not 1 <= modes < n // 2:
        raise GridError(f"modes must lie in [1, n/2), got {modes}")
    ab = np.random.default_rng(seed).standard_normal(2 * modes).reshape(modes, 2)
    x = nodes(n)
    j = np.arange(1, modes + 1, dtype=np.float64)
    arg = 2.0 * np.pi * np.outer(x, j)
    eta = (np.sin(arg) @ (ab[:, 0] / j) + (np.cos(arg) - 1.0) @ (ab[:, 1] / j)) * np.sqrt(2.0) / (2.0 * np.pi)
    eta[0] = 0.0
    return NoiseSample(GridFunction(eta), 0.0, seed=int(seed), kl_modes=int(modes), kind="periodic")


def zero_noise(n: int) -> NoiseSample:
    return NoiseSample(GridFunction(np.zeros(n)), 0.0, kind="zero")


def constant_noise(n: int, sigma: float) -> NoiseSample:
    """``xi == sigma``, i.e. ``eta(x) = sigma * x``."""
    return with_drift(zero_noise(n), sigma)


def from_eta(eta: GridFunction | np.ndarray, sigma: float) -> NoiseSample:
    """Wrap an arbitrary admissible integral ``eta`` with ``eta(0) = 0`` and ``eta(1) = sigma``."""
    values = eta.values if isinstance(eta, GridFunction) else np.asarray(eta, dtype=np.float64)
    tilde = values - sigma * nodes(values.size)
    tilde[0] = 0.0
    return NoiseSample(GridFunction(tilde), sigma, kind="custom")


def with_drift(noise: NoiseSample, sigma: float) -> NoiseSample:
    """Add a constant ``sigma`` to the noise: ``eta(x) += sigma * x``."""
    return NoiseSample(
        noise.eta_tilde,
        noise.sigma + float(sigma),
        seed=noise.seed,
        kl_modes=noise.kl_modes,
        kind=noise.kind,
        eps=noise.eps,
    )


def heat_multiplier(n: int, eps: float) -> np.ndarray:
    if eps < 0.0:
        raise GridError(f"mollification scale must be nonnegative, got {eps}")
    k = wavenumbers(n)
    return np.exp(-eps * (2.0 * np.pi * k) ** 2)


def mollify(noise: NoiseSample, eps: float) -> NoiseSample:
    """Noise whose periodic integral is heat-smoothed at scale ``eps``; mean unchanged."""
    if eps < 0.0:
        raise GridError(f"mollification scale must be nonnegative, got {eps}")
    if eps == 0.0:
        return noise
    smooth = spectral_multiplier(noise.eta_tilde.values, heat_multiplier(noise.n, eps))
    # the multiplier preserves the mean, not the point value at 0
    smooth = smooth - smooth[0]
    return NoiseSample(
        GridFunction(smooth),
        noise.sigma,
        seed=noise.seed,
        kl_modes=noise.kl_modes,
        kind=noise.kind,
        eps=noise.eps + eps,
    )


def mollified_xi(noise: NoiseSample, eps: float) -> GridFunction:
    """Smooth approximant ``xi_eps = (H_eps eta_tilde)' + sigma``.

    ``eps = 0`` gives the spectral derivative of the raw ``eta_tilde``, which
    is meaningful for finite Karhunen-Loève sums.
    """
    n = noise.n
    mult = heat_multiplier(n, eps) * (2j * np.pi * wavenumbers(n))
    if n % 2 == 0:
        mult[-1] = 0.0
    return GridFunction(spectral_multiplier(noise.eta_tilde.values, mult) + noise.sigma)


def reconstruct(header: dict) -> NoiseSample:
    """Rebuild a sample from its header alone (bridge, periodic and zero kinds)."""
    kind = header.get("kind", "bridge")
    n = int(header["n"])
    if kind == "bridge":
        base = sample_bridge(int(header["seed"]), n, header.get("kl_modes"))
    elif kind == "periodic":
        base = sample_periodic(int(header["seed"]), n, int(header["kl_modes"]))
    elif kind == "zero":
        base = zero_noise(n)
    else:
        raise GridError(f"noise of kind {kind!r} cannot be rebuilt from its header")
    out = with_drift(base, float(header.get("sigma", 0.0)))
    eps = float(header.get("eps", 0.0))
    return mollify(out, eps) if eps > 0.0 else out


def save(noise: NoiseSample, directory: str | Path, stem: str = "noise") -> tuple[Path, Path]:
    """Write ``<stem>.json`` (header) and ``<stem>_eta.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header_path = directory / f"{stem}.json"
    csv_path = directory / f"{stem}_eta.csv"
    header_path.write_text(json.dumps(noise.header(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    to_csv(noise.eta, csv_path, header=("x", "eta"))
    return header_path, csv_path


def load(header_path: str | Path, csv_path: str | Path | None = None) -> NoiseSample:
    header = json.loads(Path(header_path).read_text(encoding="utf-8"))
    if header.get("kind") in ("bridge", "periodic", "zero"):
        return reconstruct(header)
    if csv_path is None:
        raise GridError("custom noise needs its eta CSV")
    out = from_eta(from_csv(csv_path), float(header["sigma"]))
    return NoiseSample(out.eta_tilde, out.sigma, kind=header.get("kind", "custom"), eps=float(header.get("eps", 0.0)))
