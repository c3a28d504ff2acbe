"""Experiment configuration: one defaults table, YAML files and ``--set`` overrides.

A resolved configuration is a plain nested dict. ``common`` keys are shared
by every experiment; each experiment has its own section which may override
them.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os

import yaml

OUTPUT_ENV = "WEAKCOUPLING_OUTPUT_DIR"

LADDER = [0.2, 0.1, 0.05, 0.025]

DEFAULTS = {
    "common": {
        "seed": 0,
        "potential": {"name": "poly", "k": 3, "amplitude": 1.0},
        "f0": {"length": 1.5, "power": 4, "b": 1.0,
               "drifts": [[0.0, 1.2, 0.0], [0.0, -1.2, 0.0]], "weights": [0.5, 0.5]},
        "u": {"length": 1.0, "power": 4, "radius": 3.0, "vpower": 4, "c": 0.5,
              "axis": [0.0, 1.0, 0.0], "shift": 0.0},
        "u2": {"length": 1.0, "power": 4, "radius": 3.0, "vpower": 4, "c": 0.0,
               "axis": [1.0, 0.0, 0.0], "shift": 0.3},
    },
    "kernel-limit": {"w": [1.0, 0.0, 0.0], "eps_ladder": LADDER, "tau": 1.0,
                     "resolution": [32, 16, 32], "s_steps_per_unit": 64,
                     "trajectory": "straight", "check_quadrature": True, "tolerance": 0.05},
    "landau-q": {"b": 1.0, "drift": 1.2, "extent": 4.5, "points": [24, 48], "stencil": 2,
                 "A": 1.0},
    "scatter": {"eps": 0.01, "n_events": 1000, "speed_span": 3.0, "dt_factor": 0.002},
    "nbody-run": {"N": 512, "b": 1.0, "t_final": 1.0, "dt_factor": 0.005,
                  "bins": [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0], "record_every": 0},
    "consistency": {"eps_ladder": LADDER, "t": 0.5, "n_samples": 100_000, "dt_factor": 0.002,
                    "reference": {"n": 48, "nx": 24, "nt": 16, "stencil": 4}},
    "chaos": {"eps_ladder": LADDER, "t": 0.5, "n_samples": 100_000, "dt_factor": 0.002,
              "reference": {"n": 48, "nx": 24, "nt": 16, "stencil": 4},
              "slope_target": 1.0, "slope_tol": 0.15},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str):
    """``"a.b=value"`` -> (["a", "b"], parsed value); values are YAML scalars/lists."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        val = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value for {key!r}: {exc}") from None
    return path, val


def apply_override(cfg: dict, path, value):
    node = cfg
    for p in path[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[path[-1]] = value


def load_file(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def resolve(name: str, user: dict | None = None, overrides=()) -> dict:
    """Flatten defaults, a user key-tree and ``--set`` overrides for experiment ``name``.

    The user tree may contain ``common`` and per-experiment sections; bare
    top-level keys are read as belonging to the experiment.
    """
    if name not in DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}")
    user = dict(user or {})
    common = _merge(DEFAULTS["common"], user.pop("common", None))
    section = _merge(DEFAULTS[name], user.pop(name, None))
    for other in DEFAULTS:
        user.pop(other, None)
    cfg = _merge(_merge(common, section), user)
    for item in overrides:
        path, val = parse_override(item) if isinstance(item, str) else item
        apply_override(cfg, path, val)
    validate(name, cfg)
    return cfg


def _positive(cfg, key, integer=False):
    v = cfg.get(key)
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok or v <= 0:
        kind = "a positive integer" if integer else "positive"
        raise ConfigError(f"field {key!r} must be {kind}, got {v!r}")


def _ladder(cfg, key="eps_ladder"):
    lad = cfg.get(key)
    if not isinstance(lad, list) or not lad:
        raise ConfigError(f"field {key!r} must be a nonempty list")
    if any(not isinstance(e, (int, float)) or not 0 < e < 1 for e in lad):
        raise ConfigError(f"field {key!r}: every eps must lie in (0, 1)")
    if any(b >= a for a, b in zip(lad, lad[1:])):
        raise ConfigError(f"field {key!r} must be strictly decreasing")


def validate(name: str, cfg: dict):
    seed = cfg.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"field 'seed' must be a nonnegative integer, got {seed!r}")
    if name == "kernel-limit":
        _ladder(cfg)
        _positive(cfg, "tau")
        w = cfg.get("w")
        if not isinstance(w, list) or len(w) != 3 or not any(w):
            raise ConfigError("field 'w' must be a nonzero 3-vector")
        if cfg.get("trajectory") not in ("straight", "deflected"):
            raise ConfigError("field 'trajectory' must be 'straight' or 'deflected'")
    elif name == "landau-q":
        _positive(cfg, "b")
        _positive(cfg, "extent")
        pts = cfg.get("points")
        if not isinstance(pts, list) or not pts or any(not isinstance(p, int) or p < 16 for p in pts):
            raise ConfigError("field 'points' must be a list of integers >= 16")
        _positive(cfg, "A")
        if cfg.get("stencil") not in (2, 4):
            raise ConfigError("field 'stencil' must be 2 or 4")
    elif name == "scatter":
        if not 0 < cfg.get("eps", 0) < 1:
            raise ConfigError("field 'eps' must lie in (0, 1)")
        _positive(cfg, "n_events", integer=True)
        _positive(cfg, "speed_span")
        _positive(cfg, "dt_factor")
    elif name == "nbody-run":
        _positive(cfg, "N", integer=True)
        if cfg["N"] < 2:
            raise ConfigError("field 'N' must be at least 2")
        _positive(cfg, "b")
        _positive(cfg, "t_final")
        _positive(cfg, "dt_factor")
        bins = cfg.get("bins")
        if not isinstance(bins, list) or len(bins) < 2 or any(b >= a for a, b in zip(bins[1:], bins)):
            raise ConfigError("field 'bins' must be an increasing list of edges")
    elif name in ("consistency", "chaos"):
        _ladder(cfg)
        t = cfg.get("t")
        if not isinstance(t, (int, float)) or t < 0:
            raise ConfigError(f"field 't' must be nonnegative, got {t!r}")
        _positive(cfg, "n_samples", integer=True)
        _positive(cfg, "dt_factor")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj) -> str:
    """sha256 of the canonical JSON encoding (git-style content address)."""
    data = canonical_json(obj).encode()
    return hashlib.sha256(b"blob %d\0" % len(data) + data).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "weakcoupling-out")


def defaults_yaml() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
