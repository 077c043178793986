"""Run configuration: a single versioned JSON document.

Validation happens in two layers. The JSON schema pins types, ranges and
required keys; :func:`load_config` then builds the rate functions, which
checks signs and the normalisation of the initial density.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .rates import RateFunctions, RateValidationError, rate_from_config

__all__ = ["SCHEMA_VERSION", "CONFIG_SCHEMA", "RunConfig", "load_config", "parse_config"]

SCHEMA_VERSION = 1

_RATE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "cosine_series", "polynomial", "grid_samples"]},
        "value": {"type": "number"},
        "coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "path": {"type": "string"},
        "x": {"type": "array", "items": {"type": "number"}},
        "values": {"type": "array", "items": {"type": "number"}},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["value"]}},
        {"if": {"properties": {"kind": {"enum": ["cosine_series", "polynomial"]}}}, "then": {"required": ["coefficients"]}},
        {
            "if": {"properties": {"kind": {"const": "grid_samples"}}},
            "then": {"anyOf": [{"required": ["path"]}, {"required": ["x", "values"]}]},
        },
    ],
}

_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "seed", "rates", "N", "t_checkpoints"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "rates": {
            "type": "object",
            "required": ["lambda_d", "lambda_c", "zeta"],
            "additionalProperties": False,
            "properties": {"lambda_d": _RATE, "lambda_c": _RATE, "zeta": _RATE},
        },
        "N": {"type": "integer", "minimum": 1, "maximum": 64},
        "n_max": {"type": "integer", "minimum": 1, "maximum": 40},
        "t_checkpoints": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "orders": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 4}, "minItems": 1},
        "output_dir": {"type": "string"},
        "force_run_assumption2": {"type": "boolean"},
        "assumption2_tol": _POS,
        "basis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"grid_size": {"type": "integer", "minimum": 16}},
        },
        "galerkin": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dt": _POS, "scheme": {"enum": ["rk4", "backward_euler"]}},
        },
        "fk": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": _COUNT,
                "estimator": {"enum": ["pathwise", "hermite"]},
                "inner_paths": _COUNT,
                "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
        },
        "fd": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dt": _POS, "L": _POS, "M_grid": {"type": "integer", "minimum": 9}},
        },
        "reconstruct": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"enum": ["fk", "hermite", "fd", "gaussian"]},
                "budget": _COUNT,
                "grid_points": {"type": "integer", "minimum": 2, "maximum": 1001},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "runs": _COUNT,
                "dt": _POS,
                "bins": _COUNT,
                "n_track": {"type": "integer", "minimum": 0},
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"atol": _POS, "cme_n_max": {"type": "integer", "minimum": 2}},
        },
        "selftest": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"instances": _COUNT, "tol": _POS},
        },
    },
}

_DEFAULTS = {
    "n_max": 12,
    "orders": [0, 1, 2],
    "output_dir": "out",
    "force_run_assumption2": False,
    "assumption2_tol": 1e-8,
    "basis": {},
    "galerkin": {"dt": 1e-3, "scheme": "rk4"},
    "fk": {"paths": 100_000, "estimator": "pathwise", "inner_paths": 1, "points": []},
    "fd": {"dt": 1e-3, "L": 6.0},
    "reconstruct": {"backend": "fk", "budget": 2000, "grid_points": 51},
    "simulate": {"runs": 10_000, "dt": 1e-3, "bins": 20, "n_track": 4},
    "compare": {"atol": 1e-4, "cme_n_max": 60},
    "selftest": {"instances": 100, "tol": 1e-10},
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    rates: RateFunctions
    seed: int
    N: int
    n_max: int
    t_checkpoints: list
    orders: list
    output_dir: str
    force_run_assumption2: bool
    assumption2_tol: float
    sections: dict = field(default_factory=dict)
    sha256: str = ""

    def section(self, name: str) -> dict:
        return self.sections[name]


def parse_config(doc: dict, base_dir=None, text: str | None = None) -> RunConfig:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config invalid at {loc}: {exc.message}") from None
    try:
        rates = RateFunctions(*(rate_from_config(doc["rates"][k], base_dir) for k in ("lambda_d", "lambda_c", "zeta")))
        rates.validate()
    except (RateValidationError, OSError, KeyError, IndexError) as exc:
        raise ConfigError(f"rate specification invalid: {exc}") from None
    sections = {k: {**v, **doc.get(k, {})} for k, v in _DEFAULTS.items() if isinstance(v, dict)}
    canon = text if text is not None else json.dumps(doc, sort_keys=True)
    cps = sorted(float(t) for t in doc["t_checkpoints"])
    n_max = int(doc.get("n_max", _DEFAULTS["n_max"]))
    orders = sorted(set(int(n) for n in doc.get("orders", _DEFAULTS["orders"])))
    if orders[-1] > n_max:
        raise ConfigError("orders must not exceed n_max")
    return RunConfig(
        raw=doc,
        rates=rates,
        seed=int(doc["seed"]),
        N=int(doc["N"]),
        n_max=n_max,
        t_checkpoints=cps,
        orders=orders,
        output_dir=doc.get("output_dir", _DEFAULTS["output_dir"]),
        force_run_assumption2=bool(doc.get("force_run_assumption2", False)),
        assumption2_tol=float(doc.get("assumption2_tol", _DEFAULTS["assumption2_tol"])),
        sections=sections,
        sha256=hashlib.sha256(canon.encode()).hexdigest(),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(doc, base_dir=path.parent, text=text)
