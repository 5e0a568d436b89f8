"""Run configuration: schema, file loading, overrides, manifests.

A run config is a JSON file with flat scalar keys plus four sub-blocks
(geometry, denoiser, paths, metrics).  Unknown keys are rejected at
validation time so typos cannot silently change a run.  Every command
writes a ``manifest.json`` next to its outputs containing the full
effective config (under ``"config"``) and anything derived at runtime
(under ``"derived"``); feeding a manifest back in as ``--config``
reproduces the run byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os

from .errors import ConfigError

ENDPOINT_ENV = "TILTRECON_DENOISER_ENDPOINT"

# key -> default; None means "unset" (resolved per command/method)
TOP_DEFAULTS = {
    "method": "ddgm",            # algebraic | ddgm | dps | ddrm
    "lambda": None,              # gradient step size; null -> auto-tuned
    "k": 25,                     # gradient steps per denoising step
    "n": None,                   # diffusion / outer steps (50; ddrm: 10)
    "sigma1": None,              # initial noise (3.0; ddrm/generate: 30.0)
    "sigma_n": 0.03,
    "alpha": 0.183,
    "beta": 0.5,
    "zeta": 0.1,
    "rescaled": True,
    "eta": 1.0,
    "eta_b": 1.0,
    "sv_threshold": 1.0 / 30.0,
    "sigma_y": 0.0,              # measurement noise level (ddrm input)
    "schedule": "geometric",     # dps/generate: geometric | eq2
    "snr": 10.0,                 # null -> noiseless measurements
    "seed": 0,
    "count": 1,                  # synthesize / generate batch size
    "size": None,                # image shape [h, w] (32x32; blend-demo: 64x512)
    "generator": "gaussian",     # gaussian | blobs
    "corr_length": 2.0,
    "variance": 1.0,
    "patch": 32,                 # patchified denoiser (blend-demo)
    "stride": 24,
    "bump_profile": "printed",   # printed | edge_decay
    "png": False,
    "sweep": None,               # {"k": [5, 10], ...} parameter grid
}

BLOCK_DEFAULTS = {
    "geometry": {
        "num_angles": 32,
        "angle_min": -60.0,
        "angle_max": 60.0,
        "detector_bins": None,
    },
    "denoiser": {
        "kind": "analytic",      # analytic | passthrough | remote
        "corr_length": 2.0,
        "variance": 1.0,
        "endpoint": None,
    },
    "paths": {
        "input": None,
        "output": "out",
        "truth": None,
    },
    "metrics": {
        "window_size": 11,
        "window_sigma": 1.5,
        "k1": 0.01,
        "k2": 0.03,
    },
}

_SWEEPABLE = {"k", "n", "sigma1", "zeta", "eta", "alpha", "snr", "method"}


def default_config() -> dict:
    cfg = dict(TOP_DEFAULTS)
    for block, defaults in BLOCK_DEFAULTS.items():
        cfg[block] = dict(defaults)
    return cfg


def _merge(cfg: dict, updates: dict, source: str) -> None:
    for key, value in updates.items():
        if key in BLOCK_DEFAULTS:
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: key '{key}' must be an object")
            for sub, subval in value.items():
                if sub not in BLOCK_DEFAULTS[key]:
                    raise ConfigError(f"{source}: unknown key '{key}.{sub}'")
                cfg[key][sub] = subval
        elif key in TOP_DEFAULTS:
            cfg[key] = value
        else:
            raise ConfigError(f"{source}: unknown key '{key}'")


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"override '{text}' must look like key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed
    return key.strip(), value


def load_config(path: str | None, overrides: list[str] | None = None) -> dict:
    """Defaults <- config file <- --set overrides, validated."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]  # accept a previously written manifest
        _merge(cfg, data, path)
    for text in overrides or []:
        key, value = _parse_override(text)
        if "." in key:
            block, _, sub = key.partition(".")
            _merge(cfg, {block: {sub: value}}, "--set")
        else:
            _merge(cfg, {key: value}, "--set")
    endpoint = os.environ.get(ENDPOINT_ENV)
    if endpoint:
        cfg["denoiser"]["endpoint"] = endpoint
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["method"] not in ("algebraic", "ddgm", "dps", "ddrm"):
        raise ConfigError(f"key 'method': unknown method {cfg['method']!r}")
    if cfg["schedule"] not in ("geometric", "eq2"):
        raise ConfigError(f"key 'schedule': must be geometric or eq2")
    if cfg["denoiser"]["kind"] not in ("analytic", "passthrough", "remote"):
        raise ConfigError(
            f"key 'denoiser.kind': unknown kind {cfg['denoiser']['kind']!r}")
    if cfg["denoiser"]["kind"] == "remote" and not cfg["denoiser"]["endpoint"]:
        raise ConfigError("key 'denoiser.endpoint': required for a remote denoiser")
    size = cfg["size"]
    if size is not None and (not isinstance(size, (list, tuple)) or len(size) != 2
                             or any(int(s) < 1 for s in size)):
        raise ConfigError(f"key 'size': expected [h, w] positive, got {size!r}")
    for key in ("k", "n", "count", "seed", "patch", "stride"):
        if cfg[key] is not None and int(cfg[key]) < 0:
            raise ConfigError(f"key '{key}': must be nonnegative")
    if cfg["sweep"] is not None:
        if not isinstance(cfg["sweep"], dict) or not cfg["sweep"]:
            raise ConfigError("key 'sweep': must be a non-empty object of lists")
        for key, values in cfg["sweep"].items():
            if key not in _SWEEPABLE:
                raise ConfigError(f"key 'sweep.{key}': not sweepable "
                                  f"(choose from {sorted(_SWEEPABLE)})")
            if not isinstance(values, list) or not values:
                raise ConfigError(f"key 'sweep.{key}': must be a non-empty list")


def require_input(cfg: dict, command: str) -> str:
    path = cfg["paths"]["input"]
    if not path:
        raise ConfigError(f"key 'paths.input': required by {command}")
    if not os.path.exists(path) and not os.path.exists(path + ".f32"):
        raise ConfigError(f"key 'paths.input': path does not exist: {path}")
    return path


def resolve_size(cfg: dict, default: tuple[int, int] = (32, 32)) -> tuple[int, int]:
    size = cfg["size"] if cfg["size"] is not None else default
    return int(size[0]), int(size[1])


def resolve_sigma1(cfg: dict, context: str) -> float:
    if cfg["sigma1"] is not None:
        return float(cfg["sigma1"])
    return 30.0 if context in ("ddrm", "generate") else 3.0


def resolve_steps(cfg: dict, context: str) -> int:
    if cfg["n"] is not None:
        return int(cfg["n"])
    return 10 if context == "ddrm" else 50


def config_hash(cfg: dict) -> str:
    """Stable short id of an effective config (sweep cell key)."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def write_manifest(directory: str, cfg: dict, derived: dict) -> str:
    from .storage import atomic_write

    path = os.path.join(directory, "manifest.json")
    body = json.dumps({"config": cfg, "derived": derived}, indent=1, sort_keys=True)
    atomic_write(path, (body + "\n").encode())
    return path
