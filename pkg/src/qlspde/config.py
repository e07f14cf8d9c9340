"""JSON experiment configs: defaults, validation and noise construction.

A config is a JSON object::

    {
      "seed": 0,
      "noise": {"kind": "bridge", "kl_modes": null, "sigma": 0.0},
      "sim": {"n": 256, "dt": 0.001, "t_end": 1.0, "scheme": "f_imex", ...},
      "seeds": [0, 1, 2],
      "eps_list": [0.01, 0.001, 0.0001],
      ...
    }

``seed`` is the only source of randomness: the noise is drawn from
``seed XOR 0`` and random initial data from ``seed XOR 1``. Unknown keys are
rejected at every level. A run manifest (which carries the resolved config
under ``"config"``) is accepted in place of a config file.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from . import noise as _noise
from .grid import GridFunction, nodes
from .solver import ConfigError, SimConfig

NOISE_DEFAULTS = {"kind": "bridge", "kl_modes": None, "modes": 4, "amplitude": 1.0, "mode": 1, "sigma": 0.0}
NOISE_KEYS = {
    "bridge": {"kind", "kl_modes", "sigma"},
    "periodic": {"kind", "modes", "sigma"},
    "single_mode": {"kind", "amplitude", "mode", "sigma"},
    "zero": {"kind", "sigma"},
}

COMMAND_DEFAULTS: dict[str, dict] = {
    "noise": {},
    "stationary": {"quadrature": "spectral"},
    "energy": {},
    "simulate": {"seeds": None},
    "decay": {"seeds": None, "t_layer": 0.01, "rate_factor": 0.95, "final_tol": None},
    "drift": {"window": [5.0, 20.0], "rel_tol": 0.1, "pairing_tol": 1e-8},
    "convergence": {"eps_list": [1e-2, 1e-3, 1e-4], "min_ratio": 2.0},
    "initial-layer": {"ns": [256, 512, 1024], "delta": 1e-3, "count": 3, "t0_range": [1.7, 2.3], "delta_range": [0.8, 1.25]},
}

COMMANDS = tuple(COMMAND_DEFAULTS)


def _sim_defaults() -> dict:
    return SimConfig().to_dict()


def defaults(command: str) -> dict:
    if command not in COMMAND_DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    out = {"seed": 0, "noise": {"kind": "bridge", "kl_modes": None, "sigma": 0.0}, "sim": _sim_defaults()}
    out.update(copy.deepcopy(COMMAND_DEFAULTS[command]))
    return out


def read_json(path: str | Path) -> dict:
    """Parse a JSON file, turning syntax errors into line/column diagnostics."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "config" in data and "command" in data:
        # a run manifest: replay its resolved config
        data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: manifest 'config' must be an object")
    return data


def resolve(command: str, user: dict | None) -> dict:
    """Merge ``user`` over the defaults of ``command``; unknown keys raise."""
    cfg = defaults(command)
    user = {} if user is None else user
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {unknown}")
    for key, value in user.items():
        if key == "sim":
            if not isinstance(value, dict):
                raise ConfigError("'sim' must be an object")
            bad = sorted(set(value) - set(cfg["sim"]))
            if bad:
                raise ConfigError(f"unknown keys in 'sim': {bad}")
            cfg["sim"].update(value)
        elif key == "noise":
            if not isinstance(value, dict):
                raise ConfigError("'noise' must be an object")
            kind = value.get("kind", "bridge")
            if kind not in NOISE_KEYS:
                raise ConfigError(f"unknown noise kind {kind!r}; choose from {sorted(NOISE_KEYS)}")
            bad = sorted(set(value) - NOISE_KEYS[kind])
            if bad:
                raise ConfigError(f"unknown keys in 'noise' for kind {kind!r}: {bad}")
            cfg["noise"] = {k: value.get(k, NOISE_DEFAULTS[k]) for k in sorted(NOISE_KEYS[kind])}
        else:
            cfg[key] = value
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError(f"'seed' must be an unsigned 64-bit integer, got {cfg['seed']!r}")
    cfg["sim"]["seed"] = cfg["seed"]
    sim_config(cfg)  # validates field values
    _check_lists(command, cfg)
    return cfg


def _check_lists(command: str, cfg: dict) -> None:
    if command == "convergence" and (not isinstance(cfg["eps_list"], list) or len(cfg["eps_list"]) < 2):
        raise ConfigError("'eps_list' needs at least two values")
    if command == "initial-layer" and (not isinstance(cfg["ns"], list) or len(cfg["ns"]) < 2):
        raise ConfigError("'ns' needs at least two grid sizes")
    if cfg.get("seeds") is not None and (not isinstance(cfg["seeds"], list) or not cfg["seeds"]):
        raise ConfigError("'seeds' must be a nonempty list when given")
    if command == "drift" and (not isinstance(cfg["window"], list) or len(cfg["window"]) != 2):
        raise ConfigError("'window' must be [t_start, t_stop]")


def apply_overrides(cfg: dict, *, seed: int | None = None, **sim_values) -> dict:
    """Command-line flags override config scalars."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["seed"] = seed
        cfg["sim"]["seed"] = seed
    for key, value in sim_values.items():
        if value is not None:
            cfg["sim"][key] = value
    sim_config(cfg)
    return cfg


def sim_config(cfg: dict, **changes) -> SimConfig:
    data = {**cfg["sim"], **changes}
    try:
        return SimConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"bad 'sim' section: {exc}") from None


def make_noise(spec: dict, seed: int, n: int) -> _noise.NoiseSample:
    """Noise sample for ``spec`` drawn from the noise stream of ``seed``."""
    kind = spec.get("kind", "bridge")
    sub = _noise.substream_seed(seed, _noise.STREAM_NOISE)
    sigma = float(spec.get("sigma", 0.0))
    try:
        if kind == "bridge":
            base = _noise.sample_bridge(sub, n, spec.get("kl_modes"))
        elif kind == "periodic":
            base = _noise.sample_periodic(sub, n, int(spec.get("modes", 4)))
        elif kind == "single_mode":
            k = int(spec.get("mode", 1))
            amp = float(spec.get("amplitude", 1.0))
            eta = amp * np.sin(2.0 * np.pi * k * nodes(n)) / (2.0 * np.pi * k)
            eta[0] = 0.0
            base = _noise.NoiseSample(GridFunction(eta), 0.0, kind="single_mode")
        elif kind == "zero":
            base = _noise.zero_noise(n)
        else:
            raise ConfigError(f"unknown noise kind {kind!r}")
    except ValueError as exc:
        raise ConfigError(f"bad 'noise' section: {exc}") from None
    return _noise.with_drift(base, sigma) if sigma != 0.0 else base
