"""Experiment configuration: JSON files validated against a fixed schema.

A config names one seed, a sweep setup (grids, time mesh, coefficients,
operators, (p, beta) pairs, input battery) and an optional ``checks`` block
with per-check parameters for the acceptance checks. The hash written into
every record is the SHA-256 of the canonical JSON form.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

import jsonschema

from ..coefficients import KINDS
from .exponents import admissible, p_L

CHECK_NAMES = ("identities", "spectral", "decay", "fubini", "aperture", "sweep", "trace", "inequalities",
               "exponents")

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["seed", "operators", "pairs"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [1, 2]},
                "N": {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 1},
                "period": _pos,
            },
        },
        "time_grid": {
            "type": "object",
            "required": ["t_min", "t_max"],
            "additionalProperties": False,
            "properties": {"t_min": _pos, "t_max": _pos, "ratio": {"type": "number", "exclusiveMinimum": 1}},
        },
        "coefficients": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "additionalProperties": False,
                "properties": {
                    "kind": {"enum": list(KINDS)},
                    "params": {"type": "object"},
                    "seed": {"type": "integer", "minimum": 0},
                    "label": {"type": "string"},
                },
            },
        },
        "operators": {"type": "array", "minItems": 1, "uniqueItems": True,
                      "items": {"enum": ["L1", "Lhalf", "L0"]}},
        "pairs": {"type": "array", "minItems": 1,
                  "items": {"type": "array", "prefixItems": [_pos, _number], "minItems": 2, "maxItems": 2}},
        "m": _pos,
        "battery": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "integer", "minimum": 0} for k in ("atoms", "noise", "bumps")},
        },
        "p_minus": {"type": "number", "minimum": 1, "maximum": 2},
        "force": {"type": "boolean"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"drift": {"type": "number", "exclusiveMinimum": 1}},
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"type": "object"} for name in CHECK_NAMES},
        },
        "output": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "name": "experiment",
    "grid": {"dim": 1, "N": [128, 256], "period": 1.0},
    "time_grid": {"t_min": 1e-3, "t_max": 0.25},
    "coefficients": [{"kind": "identity"}],
    "m": 2,
    "battery": {"atoms": 4, "noise": 2, "bumps": 2},
    "p_minus": 1.0,
    "force": False,
    "tolerances": {"drift": 2.0},
    "checks": {},
    "output": "results",
    "workers": 1,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending file."""


def validate(config: dict, source: str = "<config>") -> dict:
    """Validate against :data:`SCHEMA`, fill defaults and check the grid ranges."""
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None
    out = copy.deepcopy(DEFAULTS)
    for key, val in config.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "checks":
            out[key] = {**out[key], **val}
        else:
            out[key] = copy.deepcopy(val)
    tg = out["time_grid"]
    if not tg["t_min"] < tg["t_max"]:
        raise ConfigError(f"{source}: time_grid: t_min must be below t_max")
    if out["grid"]["dim"] == 2 and max(out["grid"]["N"]) > 32:
        raise ConfigError(f"{source}: grid: N above 32 is not supported in 2-D")
    if out["grid"]["dim"] == 1 and max(out["grid"]["N"]) > 512:
        raise ConfigError(f"{source}: grid: N above 512 is not supported in 1-D")
    return out


def load_config(path: str | os.PathLike) -> dict:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return validate(raw, str(path))


def canonical_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form (``workers`` and ``output`` excluded)."""
    body = {k: v for k, v in config.items() if k not in ("workers", "output")}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


def annotate_pairs(config: dict) -> list[dict]:
    """Each (p, beta) pair with its admissibility against ``p_L(beta)``."""
    n = config["grid"]["dim"]
    pm = config["p_minus"]
    return [{"p": p, "beta": b, "p_L": str(p_L(n, b, pm)), "admissible": admissible(p, b, n, pm)}
            for p, b in config["pairs"]]


def packaged_config(name: str) -> Path:
    """Path of a config shipped with the package (``acceptance`` or ``example``)."""
    return Path(__file__).resolve().parent.parent / "configs" / f"{name}.json"
