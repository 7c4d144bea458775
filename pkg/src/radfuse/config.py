"""Run configuration: one JSON document drives every stage.

The schema rejects unknown keys so a typo ("clip_limt") fails loudly
before any work starts. Defaults are merged in after validation, so a
minimal config only needs the paths it actually uses.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .handcrafted import GROUP_NAMES

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preprocess": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tile_grid": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "clip_limit": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "bins": {"type": "integer", "minimum": 2, "maximum": 256},
                "means_bgr": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
        },
        "features": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "groups": {
                    "type": "array",
                    "items": {"enum": list(GROUP_NAMES)},
                    "uniqueItems": True,
                },
                "handcrafted_path": {"type": ["string", "null"]},
                "deep": {
                    "type": ["object", "null"],
                    "additionalProperties": False,
                    "properties": {
                        "backend": {"enum": ["onnx", "precomputed"]},
                        "model_path": {"type": "string"},
                        "feature_path": {"type": "string"},
                        "width": {"type": ["integer", "null"], "minimum": 1},
                    },
                    "required": ["backend"],
                },
            },
        },
        "kpca": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "kernel": {"enum": ["linear", "rbf"]},
                "gamma": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "svm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "C": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
                "stratified": {"type": "boolean"},
            },
        },
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "manifest": {"type": "string"},
                "model_out": {"type": "string"},
                "report_out": {"type": ["string", "null"]},
            },
        },
    },
}

DEFAULT_CONFIG = {
    "preprocess": {
        "tile_grid": [8, 8],
        "clip_limit": 2.0,
        "bins": 256,
        "means_bgr": [103.939, 116.779, 123.68],
    },
    "features": {
        "groups": list(GROUP_NAMES),
        "handcrafted_path": None,
        "deep": None,
    },
    "kpca": {"k": 1000, "kernel": "linear", "gamma": None},
    "svm": {"C": 1.0, "tol": 1e-4, "max_iter": 10000, "seed": 0},
    "split": {"train_fraction": 0.8, "seed": 0, "stratified": True},
    "paths": {},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(doc: dict) -> dict:
    """Validate against the schema and merge in defaults."""
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    merged = _merge(DEFAULT_CONFIG, doc)
    deep = merged["features"]["deep"]
    if deep is not None:
        if deep["backend"] == "onnx" and not deep.get("model_path"):
            raise ConfigError("features.deep.backend 'onnx' requires model_path")
        if deep["backend"] == "precomputed" and not deep.get("feature_path"):
            raise ConfigError("features.deep.backend 'precomputed' requires feature_path")
        deep.setdefault("model_path", None)
        deep.setdefault("feature_path", None)
        deep.setdefault("width", None)
    return merged


def load_config(path) -> dict:
    """Read, validate, and default-fill a JSON run config."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level config must be a JSON object")
    return validate_config(doc)
