"""
Run configuration: JSON files validated against a schema, with every default
written back so an echoed config reproduces the run on its own.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Dict

import jsonschema
import numpy as np

from . import hyperbolic as hb
from .convex import Ball, ConvexBody, GeodesicLine, Horoball
from .groups import GroupSpec
from .hyperbolic import Isometry, Point


class ConfigError(ValueError):
    def __init__(self, msg, path=None, key=None):
        where = f"{path}: " if path else ""
        at = f"[{key}] " if key else ""
        super().__init__(f"{where}{at}{msg}")
        self.path = path
        self.key = key


_num = {"type": "number"}
_real_or_inf = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_mat = {"type": "array", "items": _num, "minItems": 4, "maxItems": 4}


def _obj(props, required=(), **kw):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False, **kw}


SCHEMA: Dict[str, Any] = _obj(
    {
        "name": {"type": "string", "default": "run"},
        "seed": {"type": "integer", "minimum": 0},
        "group": _obj(
            {
                "kind": {"enum": ["schottky", "modular", "cyclic"]},
                "generators": {"type": "array", "items": _mat, "minItems": 1},
                "name": {"type": "string", "default": ""},
                "level": {"type": "integer", "minimum": 2, "default": 2},
            },
            required=("kind", "generators"),
        ),
        "basepoint": {**_pair, "default": [0.0, 1.0]},
        "orbit": _obj(
            {
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "wall_radius": {"type": ["number", "null"], "default": None},
                "shell_width": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
            },
            required=("radius",),
            default={},
        ),
        "patterson": _obj(
            {
                "horizon": {"type": ["number", "null"], "default": None},
                "s_offset": {"type": ["number", "null"], "minimum": 0, "default": None},
                "equivariance_tol": {"type": "number", "default": 0.05},
            },
            default={},
        ),
        "body": _obj(
            {
                "type": {"enum": ["geodesic", "horoball", "ball"]},
                "endpoints": {"type": "array", "items": _real_or_inf, "minItems": 2, "maxItems": 2},
                "center_real": _real_or_inf,
                "through": _pair,
                "center": _pair,
                "radius": {"type": "number", "minimum": 0},
            },
            required=("type",),
            default={"type": "geodesic", "endpoints": [-1.0, 1.0]},
        ),
        "omega": _obj(
            {
                "arcs": {"type": ["array", "null"], "items": _pair, "default": None},
                "axis_generator": {"type": "integer", "minimum": 0, "default": 0},
                "fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "default": 1.0},
            },
            default={},
        ),
        "test_function": _obj(
            {
                "eta": {"type": "number", "exclusiveMinimum": 0, "default": 0.1},
                "R": {"type": "number", "exclusiveMinimum": 0, "default": 2.0},
                "R0": {"type": "number", "exclusiveMinimum": 0, "default": 2.0},
                "n_samples": {"type": "integer", "minimum": 1, "default": 1000000},
                "orbit_radius": {"type": ["number", "null"], "default": None},
            },
            default={},
        ),
        "equidistribution": _obj(
            {
                "t_grid": {"type": "array", "items": _num, "minItems": 1, "default": [0, 1, 2, 3, 4, 5, 6, 7, 8]},
                "n_bm": {"type": "integer", "minimum": 1, "default": 1000000},
                "n_boot": {"type": "integer", "minimum": 2, "default": 200},
                "n_dirs": {"type": "integer", "minimum": 1, "default": 4},
                "n_ring": {"type": "integer", "minimum": 0, "default": 4},
                "margin": {"type": "number", "minimum": 0, "default": 0.05},
                "holder_alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "default": 0.5},
                "include_constant": {"type": "boolean", "default": True},
                "ratio_times": {**_pair, "default": [2, 8]},
                "ratio_max": {"type": "number", "default": 1.0 / 3.0},
                "noise_sigma": {"type": "number", "default": 3.0},
                "final_max": {"type": ["number", "null"], "default": None},
            },
            default={},
        ),
        "disintegration": _obj(
            {
                "boxes": {
                    "type": "array",
                    "items": _obj({"minus_arc": _pair, "plus_arc": _pair, "t_window": _pair},
                                  required=("minus_arc", "plus_arc", "t_window")),
                    "default": [],
                },
                "n_samples": {"type": "integer", "minimum": 1, "default": 400000},
                "n_boot": {"type": "integer", "minimum": 2, "default": 200},
                "min_ess": {"type": "number", "default": 10.0},
                "sigma": {"type": "number", "default": 3.0},
                "orbit_radius": {"type": ["number", "null"], "default": None},
            },
            default={},
        ),
        "cusp": _obj(
            {
                "parabolic": {**_mat, "default": [1, 2, 0, 1]},
                "parabolic_radius": {"type": "number", "default": 16.0},
                "refine_step": {"type": "number", "default": 2.0},
                "min_atoms": {"type": "integer", "default": 100},
                "min_bin_atoms": {"type": "integer", "default": 10},
                "slope_rel_tol": {"type": "number", "default": 0.2},
                "refine_sigma": {"type": "number", "default": 2.0},
                "delta_p_ref": {"type": "number", "default": 0.5},
                "delta_p_tol": {"type": "number", "default": 0.05},
            },
            default={},
        ),
        "output": _obj({"dir": {"type": ["string", "null"], "default": None}}, default={}),
    },
    required=("seed", "group", "orbit"),
)


def _fill_defaults(schema, value):
    """Materialise schema defaults into value (recursively for objects)."""
    if schema.get("type") == "object" and isinstance(value, dict):
        for key, sub in schema.get("properties", {}).items():
            if key not in value and "default" in sub:
                value[key] = copy.deepcopy(sub["default"])
            if key in value:
                value[key] = _fill_defaults(sub, value[key])
    elif schema.get("type") == "array" and isinstance(value, list) and isinstance(schema.get("items"), dict):
        value = [_fill_defaults(schema["items"], v) for v in value]
    return value


def validate(raw: dict, path=None) -> dict:
    cfg = copy.deepcopy(raw)
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        key = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(e.message, path, key) from None
    cfg = _fill_defaults(SCHEMA, cfg)
    jsonschema.validate(cfg, SCHEMA)
    return cfg


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config file not found", str(path))
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e.msg} at line {e.lineno})", str(path)) from None
    return validate(raw, str(path))


def echo(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# builders

def _real(x) -> float:
    return float(x) if not isinstance(x, str) else (math.inf if x == "inf" else -math.inf)


def build_group(cfg: dict) -> GroupSpec:
    g = cfg["group"]
    try:
        gens = [Isometry.from_array(np.asarray(m, dtype=float)) for m in g["generators"]]
        return GroupSpec(g["kind"], gens, g["name"] or cfg["name"], basepoint(cfg), g["level"])
    except ValueError as e:
        raise ConfigError(str(e), key="group") from None


def basepoint(cfg: dict) -> Point:
    x, y = cfg["basepoint"]
    if y <= 0:
        raise ConfigError("basepoint must lie in the upper half-plane", key="basepoint")
    return Point(float(x), float(y))


def build_body(cfg: dict) -> ConvexBody:
    b = cfg["body"]
    kind = b["type"]
    try:
        if kind == "geodesic":
            e = b.get("endpoints")
            if e is None:
                raise ConfigError("geodesic needs endpoints", key="body.endpoints")
            return GeodesicLine(float(hb.theta_from_real(_real(e[0]))), float(hb.theta_from_real(_real(e[1]))))
        if kind == "horoball":
            if "center_real" not in b or "through" not in b:
                raise ConfigError("horoball needs center_real and through", key="body")
            return Horoball(float(hb.theta_from_real(_real(b["center_real"]))), complex(*b["through"]))
        if "center" not in b or "radius" not in b:
            raise ConfigError("ball needs center and radius", key="body")
        return Ball(complex(*b["center"]), float(b["radius"]))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), key="body") from None
