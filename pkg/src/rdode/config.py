"""Run configuration: schema validation, presets and model construction."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ValidationError
from .models import ModelSpec, linear_model
from .receptor import ReceptorParams

COMMANDS = ("analyze", "region", "sweep", "simulate", "construct", "examples")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}

_axis = {
    "type": "object",
    "additionalProperties": False,
    "required": ["min", "max", "n"],
    "properties": {
        "min": _pos,
        "max": _pos,
        "n": {"type": "integer", "minimum": 2},
        "scale": {"enum": ["log", "linear"]},
        "include": {"type": "array", "items": _pos},
    },
}

_perturb = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "cosine", "ramp_sine", "none"]},
        "amp": _num,
        "mode": {"type": "integer", "minimum": 0},
        "freq": _num,
        "ramp": _num,
    },
}

_initial = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["perturbed", "csv", "ffe"]},
        "base": {"oneOf": [{"enum": ["Xplus", "Xminus"]},
                           {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}]},
        "perturbations": {"type": "array", "items": _perturb, "minItems": 3, "maxItems": 3},
        "path": {"type": "string"},
        "omega2": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "forced_jump": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "warmup": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"T": _pos},
        },
    },
}

_run = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "initial"],
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "D_v": _pos,
        "D_w": _pos,
        "initial": _initial,
        "expected_mode": {"type": "integer", "minimum": 1},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "model"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["receptor", "linear"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["m1", "m2", "m3", "mu1", "mu2", "mu3"],
                    "properties": {k: _num for k in ("m1", "m2", "m3", "mu1", "mu2", "mu3")},
                },
                "J": {"type": "array", "items": {"type": "array", "items": _num}},
                "partition": {"type": "array", "items": {"type": "integer", "minimum": 0},
                              "minItems": 3, "maxItems": 3},
                "D_v": _pos,
                "D_w": _pos,
                "L": _pos,
                "state": {"enum": ["Xplus", "Xminus"]},
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "j_max": _int_pos,
                "tail_check": {"type": "boolean"},
                "N": _int_pos,
                "M": {"type": "integer", "minimum": 16},
                "dt": _pos,
                "T": _pos,
                "window": _pos,
                "theta_ss": _pos,
                "tol": _pos,
                "max_iter": _int_pos,
                "snapshot_every": _int_pos,
            },
        },
        "analyze": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lengths": {"type": "array", "items": _pos, "minItems": 1},
                "large_Dw_mode": _int_pos,
            },
        },
        "region": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dv": _axis, "dw": _axis, "j_max": _int_pos,
                           "mark": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "panels": {"type": "array", "items": {
                    "type": "array", "minItems": 2, "maxItems": 2,
                    "items": {"enum": ["m1", "m2", "m3", "mu1", "mu2", "mu3"]}}},
                "n": {"type": "integer", "minimum": 2},
                "ranges": {"type": "object", "additionalProperties": False, "properties": {
                    k: {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
                    for k in ("m1", "m2", "m3", "mu1", "mu2", "mu3")}},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "required": ["runs"],
            "properties": {"runs": {"type": "array", "items": _run, "minItems": 1}},
        },
        "construct": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega2"],
            "properties": {
                "omega2": {"type": "array", "items": {"type": "array", "items": _num,
                                                      "minItems": 2, "maxItems": 2}},
                "max_measure": _pos,
                "simulate_T": {"type": "number", "minimum": 0},
                "sim_M": {"type": "integer", "minimum": 16},
                "snap_to_grid": {"type": "boolean"},
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path_str(err) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(cfg: dict) -> dict:
    """Schema check; raises ValidationError listing every violation."""
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        msg = "; ".join(f"{_path_str(e)}: {e.message}" for e in errors)
        raise ValidationError(f"invalid config: {msg}")
    return cfg


def preset_names() -> list[str]:
    root = resources.files("rdode") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_text(text: str, source: str = "<string>") -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{source}: top level must be an object")
    return validate(cfg)


def load(ref: str) -> dict:
    """Load a config from a file path or a preset name."""
    path = Path(ref)
    if path.is_file():
        return load_text(path.read_text(encoding="utf-8"), str(path))
    name = ref[:-5] if ref.endswith(".json") else ref
    res = resources.files("rdode") / "presets" / f"{name}.json"
    if res.is_file():
        return load_text(res.read_text(encoding="utf-8"), f"preset {name}")
    raise ValidationError(f"no config file or preset named {ref!r}; presets: {', '.join(preset_names())}")


def receptor_params(cfg: dict) -> ReceptorParams:
    m = cfg["model"]
    if m["name"] != "receptor":
        raise ValidationError("this command needs the receptor model")
    if "params" not in m:
        raise ValidationError("model/params: required for the receptor model")
    return ReceptorParams.from_mapping(m["params"])


def build_model(cfg: dict, D_v: float | None = None, D_w: float | None = None) -> ModelSpec:
    m = cfg["model"]
    D_v = m.get("D_v", 1.0) if D_v is None else D_v
    D_w = m.get("D_w", 1.0) if D_w is None else D_w
    L = m.get("L", 1.0)
    if m["name"] == "receptor":
        return receptor_params(cfg).model(D_v, D_w, L)
    if "J" not in m:
        raise ValidationError("model/J: required for the linear model")
    part = tuple(m.get("partition", (1, 1, 1)))
    return linear_model(m["J"], part, (D_v,) * part[1], (D_w,) * part[2], L)


def numerics(cfg: dict) -> dict:
    defaults = {"j_max": 256, "tail_check": True, "N": 256, "M": 512, "dt": 1e-3, "T": 2000.0,
                "window": 50.0, "theta_ss": 1e-9, "tol": 1e-12, "max_iter": 500, "snapshot_every": 20}
    return {**defaults, **cfg.get("numerics", {})}
