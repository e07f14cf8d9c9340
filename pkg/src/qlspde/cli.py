"""Command-line driver: ``qlspde <command> --config PATH --out DIR``.

Exit codes: 0 all assertions passed, 1 an assertion failed, 2 config error,
3 numerical abort. Setting ``QLSPDE_DETERMINISTIC=1`` forces one worker.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import config as _config
from . import energy as _energy
from . import noise as _noise
from . import solver as _solver
from . import stationary as _stationary
from .coefficients import CoefficientError, InverseError, from_spec
from .grid import GridFunction, cumulative_integral, to_csv
from .linalg import SolveError
from .solver import ConfigError, SolverError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
DETERMINISTIC_ENV = "QLSPDE_DETERMINISTIC"


@dataclass
class Check:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


def _check(name: str, ok: bool, detail: str) -> Check:
    return Check(name, "PASS" if ok else "FAIL", detail)


def _skip(name: str, reason: str) -> Check:
    return Check(name, "SKIPPED", reason)


def effective_workers(requested: int) -> int:
    if os.environ.get(DETERMINISTIC_ENV, "") not in ("", "0"):
        return 1
    return max(1, int(requested))


def _map(func, items: list, workers: int) -> list:
    """Ordered map; runs are independent so the result does not depend on ``workers``."""
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def _noise_for(cfg: dict, seed: int, n: int | None = None) -> _noise.NoiseSample:
    return _config.make_noise(cfg["noise"], seed, cfg["sim"]["n"] if n is None else n)


def _run_sim(args: tuple[dict, int]) -> _solver.Trajectory:
    cfg, seed = args
    sim = _config.sim_config(cfg, seed=seed)
    return _solver.evolve(sim, _noise_for(cfg, seed))


# --- commands -------------------------------------------------------------------


def cmd_noise(cfg: dict, out: Path, workers: int) -> tuple[dict, list[Check], list[Path]]:
    sample = _noise_for(cfg, cfg["seed"])
    paths = list(_noise.save(sample, out))
    eps = cfg["sim"]["eps"]
    xi = _noise.mollified_xi(sample, eps)
    path = out / "xi_eps.csv"
    to_csv(xi, path, header=("x", "xi_eps"))
    paths.append(path)
    return {"header": sample.header(), "eps": eps}, [], paths


def _stationary_for(cfg: dict) -> tuple[_stationary.StationaryProfile, _noise.NoiseSample]:
    sample = _noise.mollify(_noise_for(cfg, cfg["seed"]), cfg["sim"]["eps"])
    try:
        coeff = from_spec(cfg["sim"]["coeff"])
    except CoefficientError as exc:
        raise ConfigError(str(exc)) from None
    quad = cfg.get("quadrature", "spectral")
    if quad not in ("spectral", "trapezoid"):
        raise ConfigError(f"unknown quadrature {quad!r}")
    return _stationary.StationaryProfile.from_noise(sample, coeff, quad), sample


def cmd_stationary(cfg: dict, out: Path, workers: int):
    prof, _ = _stationary_for(cfg)
    paths = list(prof.export(out, cfg["sim"]["m"]))
    return prof.summary(cfg["sim"]["m"]), [], paths


def cmd_energy(cfg: dict, out: Path, workers: int):
    sim = _config.sim_config(cfg)
    prob = _solver.prepare(sim, _noise_for(cfg, cfg["seed"]))
    theta = GridFunction(prob.theta)
    f = GridFunction(prob.coeff.phi(prob.v0) / prob.theta)
    diag = _energy.diagnostics(f, theta, prob.coeff, prob.mu, method="fd")
    results = {**diag.__dict__, "mu": prob.mu, "z_m": prob.z, "norm_equivalence": _energy.norm_equivalence_constant(theta)}
    path = out / "energy.json"
    path.write_text(diag.to_json() + "\n", encoding="utf-8")
    return results, [], [path]


def _seeds(cfg: dict) -> list[int]:
    return list(cfg["seeds"]) if cfg.get("seeds") else [cfg["seed"]]


def _run_ensemble(cfg: dict, workers: int) -> list[tuple[int, _solver.Trajectory]]:
    seeds = _seeds(cfg)
    trajs = _map(_run_sim, [(cfg, s) for s in seeds], workers)
    return list(zip(seeds, trajs))


def cmd_simulate(cfg: dict, out: Path, workers: int):
    runs = _run_ensemble(cfg, workers)
    paths, results = [], {}
    for seed, traj in runs:
        paths += traj.save(out / f"run_{seed}")
        results[str(seed)] = traj.summary()
    return results, [], paths


def cmd_decay(cfg: dict, out: Path, workers: int):
    runs = _run_ensemble(cfg, workers)
    checks, results, paths = [], {}, []
    for seed, traj in runs:
        theta = GridFunction(traj.theta)
        coeff = traj.coeff
        bound, fast = _energy.decay_rate_bound(coeff, theta, traj.mu)
        rate = fast if traj.mu == 0.0 else -bound
        t_layer = float(cfg["t_layer"])
        mono_ok, inc = _solver.energy_monotone(traj)
        mp_ok, worst = _solver.max_principle_check(traj)
        res = {"c_star": rate, "energy_increase": inc, "max_principle_excess": worst, **traj.summary()}
        tag = f"seed={seed}"
        if traj.mu == 0.0:
            checks.append(_check(f"energy_monotone[{tag}]", mono_ok, f"largest increase {inc:.3e} (slack 1e-10)"))
        else:
            checks.append(_skip(f"energy_monotone[{tag}]", "mu != 0: monotonicity is only claimed for mu = 0"))
        checks.append(_check(f"max_principle[{tag}]", mp_ok, f"worst excess {worst:.3e} (tol 1e-8)"))
        if rate <= 0.0:
            checks.append(_skip(f"decay_slope[{tag}]", "C(theta) >= 0: no decay rate is predicted"))
            checks.append(_skip(f"h1_envelope[{tag}]", "C(theta) >= 0: no decay rate is predicted"))
        else:
            try:
                slope, npts = _solver.fit_decay_rate(traj.series_times, traj.energy_series, t_layer)
                target = -cfg["rate_factor"] * rate
                res.update(slope=slope, fit_points=npts)
                checks.append(_check(f"decay_slope[{tag}]", slope <= target, f"slope {slope:.4g} vs bound {target:.4g}"))
            except ValueError as exc:
                checks.append(_skip(f"decay_slope[{tag}]", str(exc)))
            env_ok, const, ratio = _solver.decay_envelope(traj, rate, t_layer)
            res.update(envelope_constant=const, envelope_ratio=ratio)
            checks.append(_check(f"h1_envelope[{tag}]", env_ok, f"max ratio to envelope {ratio:.3g}"))
        if cfg["final_tol"] is None:
            checks.append(_skip(f"final_distance[{tag}]", "no 'final_tol' configured"))
        else:
            dev = float(traj.sup_dev_series[-1])
            checks.append(_check(f"final_distance[{tag}]", dev < cfg["final_tol"], f"sup|v - v_bar| = {dev:.3e}"))
        results[str(seed)] = res
        paths += traj.save(out / f"run_{seed}")
    return results, checks, paths


def cmd_drift(cfg: dict, out: Path, workers: int):
    sim = _config.sim_config(cfg)
    sample = _noise_for(cfg, cfg["seed"])
    prob = _solver.prepare(sim, sample)
    traj = _solver.evolve(sim, sample, problem=prob)
    u0 = cumulative_integral(GridFunction(prob.v0))
    rec = _solver.recover_u(traj, u0)
    a, b = cfg["window"]
    est = _solver.drift_estimate(rec, traj, (float(a), float(b)))
    theta = GridFunction(traj.theta)
    mu_star = _stationary.mu_smallness_threshold(traj.coeff, theta)
    pairing = abs(float(np.mean(traj.theta * traj.xi)) - traj.mu)
    checks = [
        _check("mu_below_threshold", abs(traj.mu) < mu_star, f"|mu| = {abs(traj.mu):.4g}, mu* = {mu_star:.4g}"),
        _check("theta_xi_pairing", pairing < cfg["pairing_tol"], f"|int theta xi - mu| = {pairing:.3e}"),
        _check("snapshot_density", rec.density_ok, f"A4 change under halving {rec.density_change:.3e}"),
    ]
    if est.predicted == 0.0:
        checks.append(_check("drift_slope", abs(est.slope) < 1e-6, f"slope {est.slope:.3e}, predicted 0"))
    else:
        checks.append(
            _check(
                "drift_slope",
                est.relative_error < cfg["rel_tol"],
                f"slope {est.slope:.6g} vs z*mu {est.predicted:.6g} (rel err {est.relative_error:.3e})",
            )
        )
    path = out / "mean_u.csv"
    rows = ["t,mean_u,A4"] + [f"{t!r},{float(u.mean())!r},{float(a4)!r}" for t, u, a4 in zip(rec.times, rec.u, rec.a4)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    results = {
        "slope": est.slope,
        "predicted": est.predicted,
        "relative_error": est.relative_error,
        "mu": traj.mu,
        "z": traj.z,
        "mu_star": mu_star,
        "pairing_error": pairing,
        "max_residual": float(rec.residual.max()) if rec.residual.size else None,
    }
    return results, checks, [path] + traj.save(out / "run")


def _final_v(args: tuple[dict, float]) -> tuple[np.ndarray, np.ndarray]:
    cfg, eps = args
    sim = _config.sim_config(cfg, eps=eps)
    sample = _noise_for(cfg, cfg["seed"])
    prob = _solver.prepare(sim, sample)
    traj = _solver.evolve(sim, sample, problem=prob)
    return prob.v0, traj.final_v


def cmd_convergence(cfg: dict, out: Path, workers: int):
    eps_list = [float(e) for e in cfg["eps_list"]]
    finals = _map(_final_v, [(cfg, e) for e in eps_list], workers)
    v0s = [v0 for v0, _ in finals]
    if any(not np.array_equal(v0s[0], w) for w in v0s[1:]):
        raise ConfigError("initial data depends on eps; use an eps-independent 'initial' profile")
    gaps = [float(np.max(np.abs(finals[i][1] - finals[i + 1][1]))) for i in range(len(finals) - 1)]
    checks = []
    for i in range(len(gaps) - 1):
        ratio = gaps[i] / gaps[i + 1] if gaps[i + 1] > 0 else float("inf")
        checks.append(
            _check(
                f"gap_ratio[{i}]",
                ratio >= cfg["min_ratio"],
                f"gap {gaps[i]:.4e} / gap {gaps[i + 1]:.4e} = {ratio:.3f} (need >= {cfg['min_ratio']})",
            )
        )
    if not checks:
        checks.append(_skip("gap_ratio", "need at least three eps values for a ratio"))
    paths = []
    for eps, (_, v) in zip(eps_list, finals):
        path = out / f"v_final_eps{eps:.0e}.csv"
        to_csv(GridFunction(v), path, header=("x", "v"))
        paths.append(path)
    return {"eps_list": eps_list, "gaps": gaps}, checks, paths


def cmd_initial_layer(cfg: dict, out: Path, workers: int):
    sim = _config.sim_config(cfg)
    rep = _solver.initial_layer_probe(
        sim,
        lambda n: _noise_for(cfg, cfg["seed"], n),
        ns=tuple(int(n) for n in cfg["ns"]),
        delta=float(cfg["delta"]),
        count=int(cfg["count"]),
    )
    lo0, hi0 = cfg["t0_range"]
    lo1, hi1 = cfg["delta_range"]
    r0, r1 = rep.ratio(0), rep.ratio(1)
    refine = max(rep.ns) / min(rep.ns)
    checks = [
        _check("h1_growth_t0", lo0 <= r0 <= hi0, f"ratio {r0:.4f} for refinement x{refine:g}, range [{lo0}, {hi0}]"),
        _check("h1_bounded_delta", lo1 <= r1 <= hi1, f"ratio {r1:.4f} at t={rep.times[1]:.3g}, range [{lo1}, {hi1}]"),
    ]
    sample = _noise_for(cfg, cfg["seed"], max(rep.ns))
    if _stationary.build_theta(_noise.mollify(sample, sim.eps))[1] == 0.0:
        every = int(round(cfg["delta"] / sim.dt))
        worst = max(float(np.max(np.diff(e[every:]), initial=0.0)) for e in rep.energy.values())
        checks.append(_check("energy_monotone_after_delta", worst <= 1e-10, f"largest increase {worst:.3e}"))
    else:
        checks.append(_skip("energy_monotone_after_delta", "mu != 0"))
    path = out / "h1.csv"
    rows = ["t," + ",".join(f"n{n}" for n in rep.ns)]
    for i, t in enumerate(rep.times):
        rows.append(f"{float(t)!r}," + ",".join(repr(float(rep.h1[n][i])) for n in rep.ns))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return rep.to_dict(), checks, [path]


HANDLERS = {
    "noise": cmd_noise,
    "stationary": cmd_stationary,
    "energy": cmd_energy,
    "simulate": cmd_simulate,
    "decay": cmd_decay,
    "drift": cmd_drift,
    "convergence": cmd_convergence,
    "initial-layer": cmd_initial_layer,
}


# --- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlspde", description="Verification campaigns for the noisy conservative PDE.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config or a previous run manifest")
        p.add_argument("--out", type=Path, default=Path("qlspde_out") / name, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for ensembles and sweeps")
        p.add_argument("--n", type=int, help="override sim.n")
        p.add_argument("--dt", type=float, help="override sim.dt")
        p.add_argument("--t-end", dest="t_end", type=float, help="override sim.t_end")
        p.add_argument("--eps", type=float, help="override sim.eps")
        p.add_argument("--m", type=float, help="override sim.m")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    started = time.perf_counter()
    manifest: dict = {"command": args.command, "version": __version__}
    try:
        user = _config.read_json(args.config) if args.config else None
        cfg = _config.resolve(args.command, user)
        cfg = _config.apply_overrides(cfg, seed=args.seed, n=args.n, dt=args.dt, t_end=args.t_end, eps=args.eps, m=args.m)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["config"] = cfg
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output directory {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    (out / "config.json").write_text(_json(cfg), encoding="utf-8")

    workers = effective_workers(args.workers)
    try:
        results, checks, paths = HANDLERS[args.command](cfg, out, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest.update(status="config_error", error=str(exc))
        _write_manifest(out, manifest, started)
        return EXIT_CONFIG
    except (SolverError, _stationary.StationaryError, InverseError, SolveError, ArithmeticError) as exc:
        failure = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SolverError):
            failure.update(step=exc.step, time=exc.time)
            if exc.state is not None:
                to_csv(GridFunction(exc.state), out / "last_state.csv", header=("x", "v"))
        print(f"numerical abort: {exc}", file=sys.stderr)
        manifest.update(status="aborted", failure=failure)
        _write_manifest(out, manifest, started)
        return EXIT_ABORT

    for chk in checks:
        print(f"{chk.status:7s} {chk.name}: {chk.detail}")
    failed = [c for c in checks if c.status == "FAIL"]
    status = "fail" if failed else "pass"
    counts = {s: sum(c.status == s for c in checks) for s in ("PASS", "FAIL", "SKIPPED")}
    if checks:
        print(f"summary: {counts['PASS']} passed, {counts['FAIL']} failed, {counts['SKIPPED']} skipped")
    manifest.update(
        status=status,
        assertions=[c.to_dict() for c in checks],
        results=results,
        artifacts=sorted(str(p.relative_to(out)) for p in paths),
    )
    _write_manifest(out, manifest, started)
    print(f"{args.command}: {status} ({out / 'manifest.json'})")
    return EXIT_FAIL if failed else EXIT_PASS


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_solver._json_default) + "\n"


def _write_manifest(out: Path, manifest: dict, started: float) -> None:
    manifest["wall_time"] = time.perf_counter() - started
    (out / "manifest.json").write_text(_json(manifest), encoding="utf-8")


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
