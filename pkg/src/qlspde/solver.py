"""Time evolution in the ``v`` and ``f = phi(v) / theta`` formulations.

Two conservative schemes share the same grid and diagnostics:

``f_imex``
    Backward Euler for the diffusive part written in the ``f`` variable,
    ``v^{n+1} - dt A_theta(phi(v^{n+1}) / theta) = v^n + dt mu D^+ f^n``, with
    ``A_theta`` the three-point weighted Laplacian and an upwind explicit
    transport term. The nonlinear system is solved by Newton's method in
    ``v``; its first iterate is the lagged-coefficient linearly implicit step.
    Only ``theta`` enters, so rough noise is fine.

``v_flux``
    Finite volumes for ``v_t = (phi(v)' + phi(v) xi_eps)'`` with face flux
    ``(phi_{j+1} - phi_j)/dx + (phi_j + phi_{j+1}) xi_{j+1/2} / 2``. The
    diffusive part is linearly implicit by default. Needs a smooth ``xi_eps``.

Both conserve the discrete mass up to round-off.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from . import coefficients as _coefficients
from . import noise as _noise
from .coefficients import CoefficientFunction
from .energy import face_weights, weighted_laplacian
from .grid import GridError, GridFunction, cumulative_integral, derivative_array, from_csv, nodes, shift_half, to_csv
from .linalg import SolveError, solve_cyclic
from .stationary import build_theta, solve_zm, stationary_profile

Scheme = Literal["f_imex", "v_flux"]


class SolverError(ArithmeticError):
    """A step could not be completed; ``step`` is the failing step index."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None, state: np.ndarray | None = None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.state = state


class CFLError(SolverError):
    pass


class BlowUpError(SolverError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n: int = 256
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: Scheme = "f_imex"
    eps: float = 0.0
    seed: int = 0
    coeff: dict = field(default_factory=lambda: {"name": "linear"})
    m: float = 0.0
    initial: dict = field(default_factory=lambda: {"kind": "constant"})
    diagnostics_every: int = 10
    explicit: bool = False
    blowup_ceiling: float = 1e6

    def __post_init__(self) -> None:
        if self.n < 8:
            raise ConfigError(f"n must be at least 8, got {self.n}")
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ConfigError(f"t_end must be at least dt, got {self.t_end} < {self.dt}")
        if self.scheme not in ("f_imex", "v_flux"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.eps < 0.0:
            raise ConfigError("eps must be nonnegative")
        if self.diagnostics_every < 1:
            raise ConfigError("diagnostics_every must be a positive integer")
        if not self.blowup_ceiling > 0.0:
            raise ConfigError("blowup_ceiling must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown simulation keys: {unknown}")
        return cls(**data)


# --- single steps ------------------------------------------------------------


def transport_cfl(coeff: CoefficientFunction, theta: np.ndarray, mu: float, dt: float) -> float:
    """CFL number ``dt |mu| c_+ / (min theta dx)`` of the explicit transport term."""
    return dt * abs(mu) * coeff.c_plus * theta.size / float(np.min(theta))


def step_f(
    v: np.ndarray,
    coeff: CoefficientFunction,
    theta: np.ndarray,
    mu: float,
    dt: float,
    *,
    theta_face: np.ndarray | None = None,
    tol: float = 1e-14,
    max_iter: int = 50,
) -> np.ndarray:
    """One step of the ``f_imex`` scheme; returns the new ``v``.

    The Newton matrix ``I - dt A_theta diag(phi'(v) / theta)`` is cyclic
    tridiagonal and its columns sum to one, so each iterate conserves mass.
    """
    n = v.size
    tf = face_weights(theta) if theta_face is None else theta_face
    tf_left = np.roll(tf, 1)
    if mu != 0.0 and transport_cfl(coeff, theta, mu, dt) > 1.0:
        raise CFLError(f"transport CFL {transport_cfl(coeff, theta, mu, dt):.3f} > 1; reduce dt")
    rhs = v.copy()
    if mu != 0.0:
        f = coeff.phi(v) / theta
        if mu > 0.0:
            rhs += dt * mu * (np.roll(f, -1) - f) * n
        else:
            rhs += dt * mu * (f - np.roll(f, 1)) * n
    scale = dt * n * n
    w = v.copy()
    for _ in range(max_iter):
        g = coeff.phi(w) / theta
        resid = w - dt * weighted_laplacian(g, tf) - rhs
        k = coeff.dphi(w) / theta
        lower = -scale * tf_left * np.roll(k, 1)
        upper = -scale * tf * np.roll(k, -1)
        diag = 1.0 + scale * (tf + tf_left) * k
        try:
            delta = solve_cyclic(lower, diag, upper, -resid)
        except SolveError as exc:
            raise SolverError(f"implicit solve failed: {exc}") from None
        w = w + delta
        if not np.all(np.isfinite(w)):
            raise SolverError("non-finite Newton iterate")
        if np.max(np.abs(delta)) <= tol * max(1.0, float(np.max(np.abs(w)))):
            return w
    raise SolverError(f"Newton did not converge in {max_iter} iterations")


def flux_divergence(v: np.ndarray, coeff: CoefficientFunction, xi_half: np.ndarray) -> np.ndarray:
    """``L_h(v)``: divergence of the face fluxes of ``phi(v)' + phi(v) xi``."""
    n = v.size
    p = coeff.phi(v)
    right = np.roll(p, -1)
    flux = (right - p) * n + 0.5 * (p + right) * xi_half
    return (flux - np.roll(flux, 1)) * n


def step_v(
    v: np.ndarray,
    coeff: CoefficientFunction,
    xi_half: np.ndarray,
    dt: float,
    *,
    explicit: bool = False,
) -> np.ndarray:
    """One step of the ``v_flux`` scheme; ``xi_half`` is ``xi_eps`` at the faces."""
    n = v.size
    rate = flux_divergence(v, coeff, xi_half)
    if explicit:
        limit = 1.0 / (2.0 * coeff.c_plus * n * n)
        if dt > limit:
            raise CFLError(f"explicit step needs dt <= dx^2/(2 c_+) = {limit:.3e}, got {dt:.3e}")
        return v + dt * rate
    k = coeff.dphi(v)
    scale = dt * n * n
    try:
        delta = solve_cyclic(-scale * np.roll(k, 1), 1.0 + 2.0 * scale * k, -scale * np.roll(k, -1), dt * rate)
    except SolveError as exc:
        raise SolverError(f"implicit solve failed: {exc}") from None
    return v + delta


# --- problem setup -----------------------------------------------------------


@dataclass
class Problem:
    """Everything a run needs that is derived from the config and noise."""

    coeff: CoefficientFunction
    noise: _noise.NoiseSample
    theta: np.ndarray
    mu: float
    xi: np.ndarray
    z: float
    v_bar: np.ndarray
    v0: np.ndarray
    m: float


def initial_state(config: SimConfig, coeff: CoefficientFunction, theta: np.ndarray, z: float) -> np.ndarray:
    """Build ``v(0)`` from ``config.initial``.

    Kinds: ``constant``, ``sine`` (``amplitude`` default 1, ``mode``), ``stationary``
    (``v_bar_m`` plus an optional sine), ``bridge`` (``amplitude``,
    ``kl_modes``; seeded from the initial-data stream) and ``csv`` (``path``).
    With ``"variable": "f"`` the profile is built for ``f`` and mapped to
    ``v = phi^{-1}(theta f)``; the mass is then whatever that gives.
    """
    spec = dict(config.initial)
    kind = spec.pop("kind", "constant")
    variable = spec.pop("variable", "v")
    # a sine or bridge profile without an amplitude would be flat; a
    # stationary start is unperturbed unless asked
    amp = float(spec.pop("amplitude", 0.0 if kind == "stationary" else 1.0))
    mode = int(spec.pop("mode", 1))
    kl_modes = spec.pop("kl_modes", None)
    path = spec.pop("path", None)
    if spec:
        raise ConfigError(f"unknown initial-data keys: {sorted(spec)}")
    if variable not in ("v", "f"):
        raise ConfigError(f"initial variable must be 'v' or 'f', got {variable!r}")
    n = config.n
    x = nodes(n)
    base = config.m if variable == "v" else z
    wave = amp * np.sin(2.0 * np.pi * mode * x)
    if kind == "constant":
        prof = np.full(n, base)
    elif kind == "sine":
        prof = base + wave
    elif kind == "stationary":
        prof = (stationary_profile(coeff, GridFunction(theta), z).values if variable == "v" else np.full(n, z)) + wave
    elif kind == "bridge":
        seed = _noise.substream_seed(config.seed, _noise.STREAM_INITIAL)
        path_b = _noise.sample_bridge(seed, n, kl_modes).eta_tilde.values
        prof = base + amp * (path_b - path_b.mean())
    elif kind == "csv":
        if path is None:
            raise ConfigError("csv initial data needs a 'path'")
        prof = from_csv(path).values
        if prof.size != n:
            raise ConfigError(f"initial CSV has {prof.size} points, config says n={n}")
    else:
        raise ConfigError(f"unknown initial kind {kind!r}")
    if variable == "f":
        return coeff.inverse(theta * prof)
    return np.asarray(prof, dtype=np.float64)


def prepare(config: SimConfig, noise: _noise.NoiseSample) -> Problem:
    if noise.n != config.n:
        raise ConfigError(f"noise has n={noise.n}, config says n={config.n}")
    try:
        coeff = _coefficients.from_spec(config.coeff)
    except _coefficients.CoefficientError as exc:
        raise ConfigError(str(exc)) from None
    smooth = _noise.mollify(noise, config.eps)
    theta_g, mu = build_theta(smooth)
    theta = theta_g.values
    if config.scheme == "v_flux" and config.eps == 0.0 and noise.kind not in ("bridge", "periodic", "zero"):
        raise ConfigError("v_flux needs eps > 0 or a finite Karhunen-Loeve sample")
    xi = _noise.mollified_xi(noise, config.eps).values
    if config.scheme == "f_imex" and mu != 0.0 and transport_cfl(coeff, theta, mu, config.dt) > 1.0:
        raise CFLError(f"transport CFL {transport_cfl(coeff, theta, mu, config.dt):.3f} > 1; reduce dt")
    z_guess = solve_zm(coeff, theta_g, config.m)
    v0 = initial_state(config, coeff, theta, z_guess)
    m = float(np.mean(v0))
    z = z_guess if m == config.m else solve_zm(coeff, theta_g, m)
    v_bar = stationary_profile(coeff, theta_g, z).values
    return Problem(coeff, smooth, theta, mu, xi, z, v_bar, v0, m)


# --- trajectories ------------------------------------------------------------


def discrete_energy(f: np.ndarray, theta_face: np.ndarray) -> float:
    """``Phi_h(f)`` with forward differences and face weights."""
    jump = (np.roll(f, -1) - f) * f.size
    return float(0.5 * np.mean(theta_face * jump * jump))


def h1_theta_distance(f: np.ndarray, z: float, theta: np.ndarray, theta_face: np.ndarray) -> float:
    """Discrete ``||f - z||_{H^1_theta}`` consistent with :func:`discrete_energy`."""
    d = f - z
    return float(np.sqrt(np.mean(d * d * theta) + 2.0 * discrete_energy(f, theta_face)))


@dataclass
class Trajectory:
    """Snapshots at diagnostic times plus scalar series at every step."""

    config: SimConfig
    theta: np.ndarray
    mu: float
    z: float
    m: float
    v_bar: np.ndarray
    xi: np.ndarray | None
    times: np.ndarray
    v_snapshots: np.ndarray
    f_snapshots: np.ndarray
    series_times: np.ndarray
    mass_series: np.ndarray
    energy_series: np.ndarray
    hnorm_series: np.ndarray
    sup_dev_series: np.ndarray
    fmin_series: np.ndarray
    fmax_series: np.ndarray
    noise_header: dict = field(default_factory=dict)

    @property
    def coeff(self) -> CoefficientFunction:
        return _coefficients.from_spec(self.config.coeff)

    @property
    def final_v(self) -> np.ndarray:
        return self.v_snapshots[-1]

    def summary(self) -> dict:
        return {
            "t_final": float(self.series_times[-1]),
            "mass": float(self.mass_series[-1]),
            "mass_drift": float(np.max(np.abs(self.mass_series - self.m))),
            "energy": float(self.energy_series[-1]),
            "hnorm": float(self.hnorm_series[-1]),
            "sup_dev": float(self.sup_dev_series[-1]),
            "mu": self.mu,
            "z": self.z,
            "m": self.m,
        }

    def save(self, directory: str | Path) -> list[Path]:
        """Write ``series.csv``, ``theta.csv`` and one CSV per snapshot (named by time)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        rows = ["t,mass,energy,hnorm,sup_dev,fmin,fmax"]
        for vals in zip(
            self.series_times,
            self.mass_series,
            self.energy_series,
            self.hnorm_series,
            self.sup_dev_series,
            self.fmin_series,
            self.fmax_series,
        ):
            rows.append(",".join(repr(float(a)) for a in vals))
        path = directory / "series.csv"
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out.append(path)
        path = directory / "theta.csv"
        to_csv(GridFunction(self.theta), path, header=("x", "theta"))
        out.append(path)
        for t, v in zip(self.times, self.v_snapshots):
            path = directory / f"v_t{t:.6f}.csv"
            to_csv(GridFunction(v), path, header=("x", "v"))
            out.append(path)
        return out


def evolve(
    config: SimConfig,
    noise: _noise.NoiseSample,
    *,
    problem: Problem | None = None,
    snapshot_filter: Callable[[int], bool] | None = None,
) -> Trajectory:
    """Run ``config`` on ``noise`` and record diagnostics.

    Scalar diagnostics are taken after every step; full snapshots every
    ``diagnostics_every`` steps and at the end. ``snapshot_filter`` can
    override which step indices produce snapshots.
    """
    prob = prepare(config, noise) if problem is None else problem
    coeff, theta, mu = prob.coeff, prob.theta, prob.mu
    tf = face_weights(theta)
    xi_half = shift_half(prob.xi) if config.scheme == "v_flux" else None
    steps = config.steps
    dt = config.dt

    v = prob.v0.copy()
    snap_t, snap_v, snap_f = [], [], []
    ser = np.empty((steps + 1, 7))

    def record(k: int, v: np.ndarray) -> None:
        f = coeff.phi(v) / theta
        t = k * dt
        ser[k] = (
            t,
            float(np.mean(v)),
            discrete_energy(f, tf),
            h1_theta_distance(f, prob.z, theta, tf),
            float(np.max(np.abs(v - prob.v_bar))),
            float(f.min()),
            float(f.max()),
        )
        want = snapshot_filter(k) if snapshot_filter is not None else (k % config.diagnostics_every == 0)
        if want or k == steps:
            snap_t.append(t)
            snap_v.append(v.copy())
            snap_f.append(f)

    record(0, v)
    for k in range(1, steps + 1):
        try:
            if config.scheme == "f_imex":
                new = step_f(v, coeff, theta, mu, dt, theta_face=tf)
            else:
                new = step_v(v, coeff, xi_half, dt, explicit=config.explicit)
        except SolverError as exc:
            exc.step, exc.time, exc.state = k, k * dt, v.copy()
            raise
        if not np.all(np.isfinite(new)) or float(np.max(np.abs(new))) > config.blowup_ceiling:
            raise BlowUpError(
                f"|v| exceeded ceiling {config.blowup_ceiling:g} at step {k} (t={k * dt:.6g})",
                step=k,
                time=k * dt,
                state=v.copy(),
            )
        v = new
        record(k, v)

    return Trajectory(
        config=config,
        theta=theta,
        mu=mu,
        z=prob.z,
        m=prob.m,
        v_bar=prob.v_bar,
        xi=prob.xi,
        times=np.array(snap_t),
        v_snapshots=np.array(snap_v),
        f_snapshots=np.array(snap_f),
        series_times=ser[:, 0].copy(),
        mass_series=ser[:, 1].copy(),
        energy_series=ser[:, 2].copy(),
        hnorm_series=ser[:, 3].copy(),
        sup_dev_series=ser[:, 4].copy(),
        fmin_series=ser[:, 5].copy(),
        fmax_series=ser[:, 6].copy(),
        noise_header=noise.header(),
    )


# --- diagnostics on trajectories ---------------------------------------------


def max_principle_check(traj: Trajectory, tol: float = 1e-8) -> tuple[bool, float]:
    """``min f(0) <= f(t) <= max f(0)`` at every step; returns ``(ok, worst excess)``."""
    lo, hi = traj.fmin_series[0], traj.fmax_series[0]
    worst = max(0.0, float(np.max(traj.fmax_series - hi)), float(np.max(lo - traj.fmin_series)))
    return worst <= tol, worst


def energy_monotone(traj: Trajectory, slack: float = 1e-10) -> tuple[bool, float]:
    """Largest step-to-step energy increase."""
    inc = float(np.max(np.diff(traj.energy_series), initial=0.0))
    return inc <= slack, max(inc, 0.0)


def fit_decay_rate(
    times: np.ndarray, values: np.ndarray, t_start: float, t_stop: float | None = None, floor: float = 1e-24
) -> tuple[float, int]:
    """Least-squares slope of ``log values`` on ``[t_start, t_stop]``, ignoring values below ``floor``.

    The floor keeps round-off plateaus out of the fit. Returns the slope and
    the number of points used.
    """
    t_stop = float(times[-1]) if t_stop is None else t_stop
    mask = (times >= t_start) & (times <= t_stop) & (values > floor)
    if np.count_nonzero(mask) < 3:
        raise ValueError("fewer than three usable points in the fit window")
    slope = np.polyfit(times[mask], np.log(values[mask]), 1)[0]
    return float(slope), int(np.count_nonzero(mask))


def decay_envelope(traj: Trajectory, rate: float, t0: float) -> tuple[bool, float, float]:
    """Check ``||f - z||_{H^1_theta} <= C e^{-rate t / 2}`` for ``t >= t0``.

    ``C = sqrt(2 (1 + C_eq^2) Phi_h(t0)) e^{rate t0 / 2}`` with
    ``C_eq = sqrt(max theta / min theta)``; it is fixed by the state at ``t0``,
    not fitted. Returns ``(ok, C, worst ratio)``.
    """
    t = traj.series_times
    i0 = int(np.searchsorted(t, t0 - 1e-12))
    ceq2 = float(traj.theta.max() / traj.theta.min())
    const = np.sqrt(2.0 * (1.0 + ceq2) * traj.energy_series[i0]) * np.exp(0.5 * rate * t[i0])
    env = const * np.exp(-0.5 * rate * t[i0:])
    # round-off floor: distances at machine precision are not decay
    floor = 1e-13 * max(1.0, abs(traj.z))
    ratio = (traj.hnorm_series[i0:] - floor) / env
    worst = float(np.max(ratio))
    return worst <= 1.0, float(const), worst


def h1_estimate(f: np.ndarray) -> float:
    """Discrete ``H^1`` norm with forward differences."""
    jump = (np.roll(f, -1) - f) * f.size
    return float(np.sqrt(np.mean(f * f) + np.mean(jump * jump)))


# --- u recovery and drift -----------------------------------------------------


@dataclass
class URecovery:
    times: np.ndarray
    u: np.ndarray
    a4: np.ndarray
    density_ok: bool
    density_change: float
    residual_times: np.ndarray
    residual: np.ndarray


def recover_u(
    traj: Trajectory,
    u0: GridFunction | np.ndarray,
    chi: CoefficientFunction | None = None,
    xi: np.ndarray | None = None,
    density_tol: float = 0.01,
) -> URecovery:
    """Rebuild ``u`` from the snapshots of ``v``.

    ``u(t, x) = A1 + int u0 - A3 + A4`` with ``A1 = int_0^x v``,
    ``A3 = int (1 - y) v`` and ``A4 = int_0^t int chi(v) xi``. ``A1`` and
    ``A3`` are exact for the trigonometric interpolant of ``v``; ``A4`` uses
    the trapezoid rule over snapshot times. The density check recomputes
    ``A4`` from every other snapshot and flags a relative change above
    ``density_tol``. The residual of ``u_t = phi'(u') u'' + chi(u') xi`` is
    reported at interior snapshots using central differences in time.
    """
    coeff = traj.coeff
    chi = coeff if chi is None else chi
    if xi is None:
        xi = traj.xi
    xi = xi.values if isinstance(xi, GridFunction) else np.asarray(xi)
    u0v = u0.values if isinstance(u0, GridFunction) else np.asarray(u0, dtype=np.float64)
    times = traj.times
    if times.size < 2:
        raise ValueError("u recovery needs at least two snapshots")
    n = u0v.size
    x = nodes(n)
    mean_u0 = float(np.mean(u0v))

    integrand = np.array([float(np.mean(chi.phi(v) * xi)) for v in traj.v_snapshots])
    dt = np.diff(times)
    a4 = np.concatenate(([0.0], np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))))

    coarse_t, coarse_g = times[::2], integrand[::2]
    if coarse_t[-1] != times[-1]:
        coarse_t = np.append(coarse_t, times[-1])
        coarse_g = np.append(coarse_g, integrand[-1])
    coarse = float(np.sum(0.5 * np.diff(coarse_t) * (coarse_g[1:] + coarse_g[:-1])))
    scale = max(abs(a4[-1]), 1e-12)
    change = abs(coarse - a4[-1]) / scale
    density_ok = change < density_tol or abs(coarse - a4[-1]) < 1e-12

    us = np.empty_like(traj.v_snapshots)
    for i, v in enumerate(traj.v_snapshots):
        a1 = cumulative_integral(GridFunction(v))
        mean_v = float(np.mean(v))
        # int_0^1 int_0^x v = mean(v)/2 + mean of the periodic part of A1
        a3 = 0.5 * mean_v + float(np.mean(a1 - mean_v * x))
        us[i] = a1 + mean_u0 - a3 + a4[i]

    res_t, res = [], []
    for i in range(1, times.size - 1):
        ut = (us[i + 1] - us[i - 1]) / (times[i + 1] - times[i - 1])
        # u = mean(v) x + periodic part, differentiated independently of v
        slope = float(np.mean(traj.v_snapshots[i]))
        periodic = us[i] - slope * x
        grad = slope + derivative_array(periodic, 1)
        lap = derivative_array(periodic, 2)
        r = ut - (coeff.dphi(grad) * lap + chi.phi(grad) * xi)
        res_t.append(times[i])
        res.append(float(np.max(np.abs(r))))
    return URecovery(times, us, a4, bool(density_ok), float(change), np.array(res_t), np.array(res))


@dataclass(frozen=True)
class DriftEstimate:
    slope: float
    predicted: float
    window: tuple[float, float]

    @property
    def relative_error(self) -> float:
        if self.predicted == 0.0:
            return abs(self.slope)
        return abs(self.slope - self.predicted) / abs(self.predicted)


def drift_estimate(rec: URecovery, traj: Trajectory, t_window: tuple[float, float]) -> DriftEstimate:
    """Least-squares slope of the spatial mean of ``u`` over ``t_window``, with ``z_m mu`` for comparison."""
    a, b = t_window
    if a < rec.times[0] or b > rec.times[-1] + 1e-12 or not a < b:
        raise ValueError(f"window {t_window} is outside the trajectory [{rec.times[0]}, {rec.times[-1]}]")
    mask = (rec.times >= a) & (rec.times <= b + 1e-12)
    if np.count_nonzero(mask) < 2:
        raise ValueError("fewer than two snapshots in the drift window")
    mean_u = rec.u[mask].mean(axis=1)
    slope = float(np.polyfit(rec.times[mask], mean_u, 1)[0])
    return DriftEstimate(slope, traj.z * traj.mu, (float(a), float(b)))


# --- initial layer -------------------------------------------------------------


@dataclass
class InitialLayerReport:
    ns: list[int]
    times: np.ndarray
    h1: dict[int, np.ndarray]
    energy: dict[int, np.ndarray]

    def ratio(self, index: int) -> float:
        """``H^1(n_max) / H^1(n_min)`` at ``times[index]``."""
        return float(self.h1[max(self.ns)][index] / self.h1[min(self.ns)][index])

    def to_dict(self) -> dict:
        return {
            "ns": self.ns,
            "times": self.times.tolist(),
            "h1": {str(n): v.tolist() for n, v in self.h1.items()},
            "energy": {str(n): v.tolist() for n, v in self.energy.items()},
            "ratio_t0": self.ratio(0),
            "ratio_delta": self.ratio(1) if self.times.size > 1 else None,
        }


def initial_layer_probe(
    config: SimConfig,
    noise_for: Callable[[int], _noise.NoiseSample],
    ns: tuple[int, ...] = (256, 512, 1024),
    delta: float = 1e-3,
    count: int = 4,
) -> InitialLayerReport:
    """Discrete ``H^1`` of ``f`` at ``t = 0, delta, ..., count * delta`` across grids.

    ``config.initial`` should describe a rough ``f(0)``, e.g. a bridge path
    with ``"variable": "f"``; bridge samples from one seed refine each other
    across ``n``. ``noise_for(n)`` supplies the noise at each resolution.
    """
    every = int(round(delta / config.dt))
    if every < 1 or abs(every * config.dt - delta) > 1e-9 * delta:
        raise ConfigError("delta must be a positive multiple of dt")
    h1: dict[int, np.ndarray] = {}
    en: dict[int, np.ndarray] = {}
    times = None
    for n in ns:
        initial = dict(config.initial)
        if initial.get("kind") == "bridge" and initial.get("kl_modes") is None:
            initial["kl_modes"] = n // 2
        cfg = SimConfig(**{**config.to_dict(), "n": n, "t_end": count * delta, "diagnostics_every": every, "initial": initial})
        traj = evolve(cfg, noise_for(n))
        times = traj.times
        h1[n] = np.array([h1_estimate(f) for f in traj.f_snapshots])
        en[n] = traj.energy_series.copy()
    return InitialLayerReport(list(ns), np.asarray(times), h1, en)


def write_manifest(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


__all__ = [
    "BlowUpError",
    "CFLError",
    "ConfigError",
    "DriftEstimate",
    "GridError",
    "InitialLayerReport",
    "Problem",
    "SimConfig",
    "SolverError",
    "Trajectory",
    "URecovery",
    "decay_envelope",
    "discrete_energy",
    "drift_estimate",
    "energy_monotone",
    "evolve",
    "fit_decay_rate",
    "flux_divergence",
    "h1_estimate",
    "h1_theta_distance",
    "initial_layer_probe",
    "max_principle_check",
    "prepare",
    "recover_u",
    "step_f",
    "step_v",
]
