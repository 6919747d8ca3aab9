"""JSON run configuration shared by every CLI command.

Top level: ``kappa``, ``prevertices``, exactly one of ``betas``/``rhos``,
``seed`` and the optional sections ``solver``, ``trace``, ``map``, ``evolve``
and ``verify``. Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .geometry import ConfigError, PrevertexConfig

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}
_posint = {"type": "integer", "minimum": 1}
_nums = {"type": "array", "items": _num}


def _section(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kappa", "prevertices"],
    "properties": {
        "kappa": _pos,
        "prevertices": _nums,
        "betas": _nums,
        "rhos": _nums,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "solver": _section({
            "T": _pos,
            "dt": _pos,
            "eps_coll": _pos,
            "order": _posint,
            "threads": _posint,
            "driver": {"enum": ["sde", "constant", "linear"]},
            "drift": _num,  # slope of the linear driver W_t = drift * t
        }),
        "trace": _section({"stride": _posint, "size": _posint}),
        "map": _section({"t": {"type": "number", "minimum": 0}, "size": _posint}),
        "evolve": _section({"frames": {"type": "array", "items": {"type": "number", "minimum": 0}},
                            "size": _posint}),
        "verify": _section({
            "test": {"type": "string"},
            "N": _posint,
            "T": _pos,
            "dt": _pos,
            "max_attrition": {"type": "number", "minimum": 0, "maximum": 1},
            "n_intervals": _posint,
            "paths": _posint,
            "x": _pos,
            "y": _pos,
            "T_max": _pos,
            "rel_tol": _pos,
            "max_undecided": {"type": "number", "minimum": 0, "maximum": 1},
            "points": {"type": "array", "items": {"type": "array", "items": _num,
                                                  "minItems": 2, "maxItems": 2}},
            "h": _pos,
            "S": _pos,
            "ds": _pos,
            "t_star": _pos,
            "drift_sign": {"enum": [-1, 1]},
        }),
    },
    "oneOf": [{"required": ["betas"], "not": {"required": ["rhos"]}},
              {"required": ["rhos"], "not": {"required": ["betas"]}}],
}

DEFAULTS = {
    "seed": 0,
    "solver": {"T": 0.05, "dt": 1e-4, "order": 12, "threads": 1, "driver": "sde", "drift": 0.0},
    "trace": {"stride": 1, "size": 600},
    "map": {"t": 0.0, "size": 600},
    "evolve": {"frames": [0.0], "size": 600},
    "verify": {"N": 20000, "max_attrition": 0.2, "n_intervals": 100, "paths": 100,
               "x": 1.0, "y": 1.0, "T_max": 1e12, "rel_tol": 1e-6, "max_undecided": 0.01,
               "points": [[0.3, 0.2], [-0.4, 0.3], [0.1, 0.5], [0.6, 0.6], [-0.2, 0.15]],
               "drift_sign": 1, "t_star": 0.05},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse(doc: dict) -> dict:
    """Validate ``doc`` and fill defaults. Raises :class:`ConfigError`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}") from None
    full = _merge(DEFAULTS, doc)
    n = len(full["prevertices"])
    w = full.get("betas", full.get("rhos"))
    if len(w) != n:
        raise ConfigError("weights and prevertices differ in length")
    return full


def load(file) -> dict:
    try:
        doc = json.loads(Path(file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{file}: invalid JSON ({e})") from None
    return parse(doc)


def prevertex_config(full: dict) -> PrevertexConfig:
    if "rhos" in full:
        return PrevertexConfig.from_rhos(full["prevertices"], full["rhos"], full["kappa"])
    return PrevertexConfig(full["prevertices"], full["betas"], full["kappa"])
