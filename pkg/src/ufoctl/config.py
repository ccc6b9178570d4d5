"""Experiment configuration: JSON document, flag overrides, validation and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
import os

import numpy as np

from .gmon import DEFAULT_RANGE_MHZ

SEED_ENV = "UFOCTL_SEED"

DEFAULTS = {
    "target": "CZ",
    "seed": 0,
    "eta_mhz": 200.0,
    "space": "full",
    "optimizer": "sgd",
    "weights": {"chi": 10.0, "beta": 10.0, "mu": 0.2, "kappa": 0.1},
    "noise": {"sigma_mhz": 0.0, "per_episode_eta": False},
    "filter": {"enabled": True, "bandwidth_mhz": 10.0},
    "horizon": {"n_max": 100, "dt_ns": 1.0},
    "sgd": {"iters": 200, "lr": 0.01, "n_steps": 50, "init_scale_mhz": 2.0, "n_noise": 1},
    "rl": {"iterations": 50, "batch_steps": 2048, "trust_region_kl": 0.01, "discount": 0.99,
           "gae_lambda": None, "init_log_std": -0.5, "threshold": 0.05, "full_state": False,
           "reward_mode": "per_step"},
    "sweep": {"gamma": float(np.pi / 2), "alpha_start": 0.1, "alpha_stop": 3.1, "step": 0.1,
              "budget_iters": 5},
    "robustness": {"sigma_grid": [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5], "samples": 60,
                   "epsilon0": 0.007, "n_haar": 0},
    "output_dir": "ufoctl_out",
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def _key_line(text: str | None, path: tuple) -> int | None:
    """1-based line of the last key in ``path`` in the raw JSON text, if present."""
    if not text:
        return None
    lines = text.splitlines()
    start = 0
    found = None
    for key in path:
        needle = f'"{key}"'
        for i in range(start, len(lines)):
            if needle in lines[i]:
                found, start = i, i
                break
        else:
            return found + 1 if found is not None else None
    return found + 1 if found is not None else None


def _merge(base: dict, override: dict, text: str | None, source: str, path=()) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = (*path, key)
        if key not in base:
            raise ConfigError(f"unknown key {'.'.join(here)!r}", _key_line(text, here), source)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(here)} must be an object",
                                  _key_line(text, here), source)
            out[key] = _merge(base[key], value, text, source, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None, overrides: dict | None = None,
                environ=None) -> dict:
    """Defaults < JSON file < UFOCTL_SEED < explicit overrides; validated."""
    environ = os.environ if environ is None else environ
    cfg = copy.deepcopy(DEFAULTS)
    text, source = None, "<defaults>"
    if path is not None:
        source = str(path)
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", None, source) from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                              exc.lineno, source) from None
        if not isinstance(doc, dict):
            raise ConfigError("top level must be a JSON object", 1, source)
        cfg = _merge(cfg, doc, text, source)
    if environ.get(SEED_ENV) not in (None, ""):
        try:
            cfg["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer", None, "<environment>") from None
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = cfg
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    validate(cfg, text, source)
    return cfg


def _check(cond: bool, msg: str, text, source, *path):
    if not cond:
        raise ConfigError(msg, _key_line(text, path), source)


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def validate(cfg: dict, text: str | None = None, source: str = "<config>") -> None:
    from .targets import parse_target

    try:
        parse_target(cfg["target"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), _key_line(text, ("target",)), source) from None
    _check(isinstance(cfg["seed"], int) and not isinstance(cfg["seed"], bool),
           "seed must be an integer", text, source, "seed")
    _check(_num(cfg["eta_mhz"]) and cfg["eta_mhz"] > 0, "eta_mhz must be positive",
           text, source, "eta_mhz")
    _check(cfg["space"] in ("full", "qubit"), "space must be 'full' or 'qubit'",
           text, source, "space")
    _check(cfg["optimizer"] in ("sgd", "rl"), "optimizer must be 'sgd' or 'rl'",
           text, source, "optimizer")
    for k, v in cfg["weights"].items():
        _check(_num(v) and v >= 0, f"weights.{k} must be >= 0", text, source, "weights", k)
    n = cfg["noise"]
    _check(_num(n["sigma_mhz"]) and 0 <= n["sigma_mhz"] <= DEFAULT_RANGE_MHZ,
           f"noise.sigma_mhz must lie in [0, {DEFAULT_RANGE_MHZ:g}]", text, source,
           "noise", "sigma_mhz")
    _check(isinstance(n["per_episode_eta"], bool), "noise.per_episode_eta must be boolean",
           text, source, "noise", "per_episode_eta")
    f = cfg["filter"]
    _check(isinstance(f["enabled"], bool), "filter.enabled must be boolean",
           text, source, "filter", "enabled")
    _check(_num(f["bandwidth_mhz"]) and 0 < f["bandwidth_mhz"] <= 50,
           "filter.bandwidth_mhz must lie in (0, 50]", text, source, "filter", "bandwidth_mhz")
    h = cfg["horizon"]
    _check(isinstance(h["n_max"], int) and h["n_max"] >= 3, "horizon.n_max must be >= 3",
           text, source, "horizon", "n_max")
    _check(_num(h["dt_ns"]) and h["dt_ns"] > 0, "horizon.dt_ns must be positive",
           text, source, "horizon", "dt_ns")
    s = cfg["sgd"]
    for k in ("iters", "n_steps", "n_noise"):
        _check(isinstance(s[k], int) and s[k] >= 1, f"sgd.{k} must be a positive integer",
               text, source, "sgd", k)
    _check(s["n_steps"] >= 4, "sgd.n_steps must be >= 4", text, source, "sgd", "n_steps")
    _check(_num(s["lr"]) and s["lr"] >= 0, "sgd.lr must be >= 0", text, source, "sgd", "lr")
    _check(_num(s["init_scale_mhz"]) and 0 <= s["init_scale_mhz"] <= DEFAULT_RANGE_MHZ,
           "sgd.init_scale_mhz out of range", text, source, "sgd", "init_scale_mhz")
    r = cfg["rl"]
    for k in ("iterations", "batch_steps"):
        _check(isinstance(r[k], int) and r[k] >= 1, f"rl.{k} must be a positive integer",
               text, source, "rl", k)
    _check(_num(r["trust_region_kl"]) and r["trust_region_kl"] > 0,
           "rl.trust_region_kl must be positive", text, source, "rl", "trust_region_kl")
    _check(_num(r["discount"]) and 0 < r["discount"] <= 1, "rl.discount must lie in (0, 1]",
           text, source, "rl", "discount")
    _check(r["gae_lambda"] is None or (_num(r["gae_lambda"]) and 0 <= r["gae_lambda"] <= 1),
           "rl.gae_lambda must be null or in [0, 1]", text, source, "rl", "gae_lambda")
    _check(_num(r["init_log_std"]), "rl.init_log_std must be a number",
           text, source, "rl", "init_log_std")
    _check(_num(r["threshold"]) and r["threshold"] >= 0, "rl.threshold must be >= 0",
           text, source, "rl", "threshold")
    _check(r["reward_mode"] in ("per_step", "terminal"),
           "rl.reward_mode must be 'per_step' or 'terminal'", text, source, "rl", "reward_mode")
    sw = cfg["sweep"]
    for k in ("gamma", "alpha_start", "alpha_stop", "step"):
        _check(_num(sw[k]), f"sweep.{k} must be a number", text, source, "sweep", k)
    _check(0 <= sw["alpha_start"] <= sw["alpha_stop"] <= np.pi,
           "sweep alphas must satisfy 0 <= start <= stop <= pi", text, source,
           "sweep", "alpha_start")
    _check(sw["step"] > 0, "sweep.step must be positive", text, source, "sweep", "step")
    _check(isinstance(sw["budget_iters"], int) and sw["budget_iters"] >= 1,
           "sweep.budget_iters must be a positive integer", text, source,
           "sweep", "budget_iters")
    rb = cfg["robustness"]
    grid = rb["sigma_grid"]
    _check(isinstance(grid, list) and len(grid) > 0 and all(_num(x) and x >= 0 for x in grid)
           and grid == sorted(grid), "robustness.sigma_grid must be a sorted list of "
           "nonnegative numbers", text, source, "robustness", "sigma_grid")
    _check(isinstance(rb["samples"], int) and rb["samples"] >= 2,
           "robustness.samples must be >= 2", text, source, "robustness", "samples")
    _check(_num(rb["epsilon0"]) and rb["epsilon0"] > 0, "robustness.epsilon0 must be positive",
           text, source, "robustness", "epsilon0")
    _check(isinstance(rb["n_haar"], int) and rb["n_haar"] >= 0,
           "robustness.n_haar must be >= 0", text, source, "robustness", "n_haar")
    _check(isinstance(cfg["output_dir"], str) and cfg["output_dir"] != "",
           "output_dir must be a non-empty string", text, source, "output_dir")


def config_hash(cfg: dict) -> str:
    """Hash of the resolved configuration (output_dir excluded)."""
    doc = {k: v for k, v in cfg.items() if k != "output_dir"}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
