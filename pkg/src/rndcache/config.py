"""Experiment configuration: defaults, named presets, YAML files and validation.

Precedence when building a configuration: command-line flags override the
file, which overrides the preset, which overrides the defaults.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from typing import Optional

import yaml

from .errors import ConfigError
from .simulator.caches import POLICIES

__all__ = ["MODES", "TABLES", "PRESETS", "DEFAULTS", "build_config", "load_file", "preset",
           "validate", "config_hash", "parse_int_list", "parse_float_list", "parse_catalogs",
           "parse_policy_sets"]

MODES = ("analyze", "simulate", "compare", "verify", "sweep")
TABLES = ("prefactors", "single", "network")
INF = "inf"

DEFAULTS: dict = {
    "table": "single",
    "distribution": {"kind": "zipf", "alpha": [1.7], "catalog": [20000], "kappa": None},
    "topology": {"shape": "single", "policies": ["RND"], "sizes": [25],
                 "leaf_weights": [1.0], "arity": None},
    "grid": {"sizes": [25], "ranks": list(range(1, 101))},
    "run": {"warmup": None, "measure": 10**6, "reps": 10, "seed": 1, "jobs": None},
    "output": {"path": None},
}

PRESETS: dict = {
    "fig-prefactors": {
        "table": "prefactors",
        "distribution": {"alpha": [round(1.05 + 0.05 * i, 2) for i in range(80)]},
    },
    "fig-single": {
        "table": "single",
        "distribution": {"alpha": [1.5, 1.7], "catalog": [2000, 5000, 20000, INF]},
        "topology": {"shape": "single", "policies": ["RND", "LRU"]},
        "grid": {"sizes": list(range(1, 101))},
        "run": {"reps": 5},
    },
    "fig-tandem": {
        "table": "network",
        "distribution": {"alpha": [1.7], "catalog": [20000]},
        "topology": {"shape": "line", "policies": ["RND-RND", "LRU-LRU"], "sizes": [25, 25]},
        "grid": {"sizes": list(range(5, 101, 5)), "ranks": list(range(1, 101))},
    },
    "fig-mixed": {
        "table": "network",
        "distribution": {"alpha": [1.7], "catalog": [20000]},
        "topology": {"shape": "tree", "policies": ["RND-LRU", "LRU-RND"], "sizes": [25, 50],
                     "leaf_weights": [0.5, 0.5], "arity": 2},
        "grid": {"ranks": list(range(1, 101))},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def preset(name: str) -> dict:
    """Full configuration of a named preset (defaults filled in)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; valid presets: {', '.join(sorted(PRESETS))}",
                          field="preset")
    return _merge(DEFAULTS, PRESETS[name])


def load_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(exc), field="config") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}", field="config") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", field="config")
    return data


def build_config(preset_name: Optional[str] = None, file_data: Optional[dict] = None,
                 overrides: Optional[dict] = None) -> dict:
    cfg = preset(preset_name) if preset_name else copy.deepcopy(DEFAULTS)
    if preset_name is None and file_data and "preset" in file_data:
        cfg = preset(file_data["preset"])
    if file_data:
        cfg = _merge(cfg, {k: v for k, v in file_data.items() if k != "preset"})
    if overrides:
        cfg = _merge(cfg, overrides)
    cfg["preset"] = preset_name or (file_data or {}).get("preset")
    return validate(cfg)


# -- flag parsing -------------------------------------------------------------


def _parse_range(token: str, cast, field: str) -> list:
    parts = token.split(":")
    try:
        if len(parts) == 1:
            return [cast(parts[0])]
        if len(parts) in (2, 3) and cast is int:
            lo, hi = int(parts[0]), int(parts[1])
            step = int(parts[2]) if len(parts) == 3 else 1
            if step < 1:
                raise ValueError
            return list(range(lo, hi + 1, step))
    except ValueError:
        pass
    raise ConfigError(f"cannot parse {token!r}", field=field)


def parse_int_list(text: str, field: str) -> list:
    """``"5,10,20"`` or ranges ``"1:100"`` / ``"5:100:5"`` (inclusive)."""
    out = []
    for tok in str(text).split(","):
        if tok.strip():
            out.extend(_parse_range(tok.strip(), int, field))
    return out


def parse_float_list(text: str, field: str) -> list:
    out = []
    for tok in str(text).split(","):
        if tok.strip():
            try:
                out.append(float(tok))
            except ValueError:
                raise ConfigError(f"cannot parse {tok!r}", field=field) from None
    return out


def parse_catalogs(text: str) -> list:
    out = []
    for tok in str(text).split(","):
        tok = tok.strip().lower()
        if tok in (INF, "infinite", "none"):
            out.append(INF)
        elif tok:
            out.extend(_parse_range(tok, int, "distribution.catalog"))
    return out


def parse_policy_sets(text: str) -> list:
    return [tok.strip().upper() for tok in str(text).split(",") if tok.strip()]


# -- validation ---------------------------------------------------------------


def _as_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def validate(cfg: dict) -> dict:
    """Check every field against the module preconditions; returns a normalized copy."""
    cfg = copy.deepcopy(cfg)
    unknown = set(cfg) - set(DEFAULTS) - {"preset", "mode"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="config")
    if cfg["table"] not in TABLES:
        raise ConfigError(f"must be one of {', '.join(TABLES)}", field="table")

    d = cfg["distribution"]
    if d.get("kind", "zipf") not in ("zipf", "geometric"):
        raise ConfigError("must be zipf or geometric", field="distribution.kind")
    if d["kind"] == "geometric":
        k = d.get("kappa")
        if k is None or not 0.0 < float(k) < 1.0:
            raise ConfigError("kappa must lie in (0, 1)", field="distribution.kappa")
    d["alpha"] = [float(a) for a in _as_list(d["alpha"])]
    if not d["alpha"] or any(not a > 1.0 for a in d["alpha"]):
        raise ConfigError("every alpha must exceed 1", field="distribution.alpha")
    cats = []
    for c in _as_list(d["catalog"]):
        if c is None or str(c).lower() in (INF, "infinite"):
            cats.append(INF)
        else:
            try:
                n = int(c)
            except (TypeError, ValueError):
                raise ConfigError(f"bad catalog size {c!r}", field="distribution.catalog") from None
            if n < 1:
                raise ConfigError("catalog sizes must be >= 1", field="distribution.catalog")
            cats.append(n)
    if not cats:
        raise ConfigError("need at least one catalog size", field="distribution.catalog")
    d["catalog"] = cats

    t = cfg["topology"]
    if t["shape"] not in ("single", "line", "tree"):
        raise ConfigError("must be single, line or tree", field="topology.shape")
    t["sizes"] = [int(c) for c in _as_list(t["sizes"])]
    if not t["sizes"] or any(c < 1 for c in t["sizes"]):
        raise ConfigError("sizes must be >= 1", field="topology.sizes")
    sets = [str(p).upper() for p in _as_list(t["policies"])]
    depth = 1 if cfg["table"] == "single" else len(t["sizes"])
    for s in sets:
        parts = s.split("-")
        if any(p not in POLICIES for p in parts):
            raise ConfigError(f"unknown policy in {s!r}; use {', '.join(POLICIES)}",
                              field="topology.policies")
        if len(parts) != depth:
            raise ConfigError(f"{s!r} names {len(parts)} levels, topology has {depth}",
                              field="topology.policies")
    if not sets:
        raise ConfigError("need at least one policy", field="topology.policies")
    t["policies"] = sets
    t["leaf_weights"] = [float(w) for w in _as_list(t["leaf_weights"])]
    if any(not w > 0 for w in t["leaf_weights"]) or abs(math.fsum(t["leaf_weights"]) - 1) > 1e-12:
        raise ConfigError("leaf weights must be positive and sum to 1", field="topology.leaf_weights")
    if t["shape"] != "tree" and len(t["leaf_weights"]) != 1:
        raise ConfigError("only trees have several leaves", field="topology.leaf_weights")

    g = cfg["grid"]
    g["sizes"] = [int(c) for c in _as_list(g["sizes"])]
    g["ranks"] = [int(r) for r in _as_list(g["ranks"])]
    if any(c < 0 for c in g["sizes"]):
        raise ConfigError("sizes must be >= 0", field="grid.sizes")
    if not g["ranks"] or any(r < 1 for r in g["ranks"]):
        raise ConfigError("ranks must be >= 1", field="grid.ranks")

    r = cfg["run"]
    for key in ("measure", "reps", "seed"):
        try:
            r[key] = int(r[key])
        except (TypeError, ValueError):
            raise ConfigError("must be an integer", field=f"run.{key}") from None
    if r["measure"] < 1:
        raise ConfigError("must be >= 1", field="run.measure")
    if r["reps"] < 0 or r["reps"] == 1:
        raise ConfigError("use 0 (no simulation) or at least 2 replications", field="run.reps")
    if r["warmup"] is not None:
        r["warmup"] = int(r["warmup"])
        if r["warmup"] < 0:
            raise ConfigError("must be >= 0", field="run.warmup")
    if r["jobs"] is not None:
        r["jobs"] = int(r["jobs"])
        if r["jobs"] < 1:
            raise ConfigError("must be >= 1", field="run.jobs")
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of ``cfg``."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()
