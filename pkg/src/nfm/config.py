"""Run configuration: JSON schema, validation, hashing, round-trip I/O.

A run config fully determines a run together with its input files; the
hash of its canonical JSON form is embedded in checkpoints and metrics so
evaluation can refuse mismatched artifacts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

_RATIOS = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
           "minItems": 2, "maxItems": 3}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nfm run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["task", "model", "data", "optim", "seed"],
    "properties": {
        "task": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["forecast", "classify", "anomaly"]},
                "horizon": {"type": "integer", "minimum": 1},
                "dr": {"type": "integer", "minimum": 1},
                "n_classes": {"type": "integer", "minimum": 2},
                "lambda": {"type": "number", "minimum": 0, "maximum": 1},
                "norm": {"enum": ["revin", "mean-only", "none"]},
                "anomaly_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 50},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "n_blocks": {"type": "integer", "minimum": 1},
                "h0": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "w0": {"type": "number", "exclusiveMinimum": 0},
                "ff_scale": {"type": "number", "exclusiveMinimum": 0},
                "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "proj_width": {"type": "integer", "minimum": 1},
                "mlp_hidden": {"type": "integer", "minimum": 1},
                "inr_hidden": {"type": "integer", "minimum": 1},
                "dtype": {"enum": ["float32", "float64"]},
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["synth_classify", "synth_forecast", "synth_anomaly",
                                  "csv", "cache"]},
                "n": {"type": "integer", "minimum": 2},
                "stride": {"type": "integer", "minimum": 1},
                "splits": _RATIOS,
                # synth_classify
                "n_time": {"type": "integer", "minimum": 4},
                "band": {"type": "array", "items": {"type": "integer", "minimum": 1},
                         "minItems": 2, "maxItems": 2},
                "n_class_freqs": {"type": "integer", "minimum": 1},
                "n_random_freqs": {"type": "integer", "minimum": 0},
                "noise_std": {"type": "number", "minimum": 0},
                "samples_per_class": {"type": "integer", "minimum": 1},
                # synth_forecast
                "length": {"type": "integer", "minimum": 8},
                "freqs": {"type": "array", "items": {"type": "number"}},
                "amps": {"type": "array", "items": {"type": "number"}},
                "phases": {"type": "array", "items": {"type": "number"}},
                # synth_anomaly
                "n_train": {"type": "integer", "minimum": 8},
                "n_test": {"type": "integer", "minimum": 8},
                "anomaly_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
                # csv / cache
                "path": {"type": "string"},
                "columns": {"type": "array", "items": {"type": "string"}},
            },
        },
        "optim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 1},
                "batch": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "lr_min": {"type": "number", "minimum": 0},
                "schedule": {"enum": ["cosine", "none"]},
                "patience": {"type": "integer", "minimum": 0},
                "weight_decay": {"type": "number", "minimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
    },
}

TASK_DEFAULTS = {"lambda": 0.5, "norm": "none", "dr": 1, "anomaly_ratio": 1.0}
MODEL_DEFAULTS = {"d": 36, "n_blocks": 1, "h0": 32, "w0": 30.0, "ff_scale": 128.0,
                  "dropout": 0.0, "inr_hidden": 32, "dtype": "float64"}
OPTIM_DEFAULTS = {"epochs": 10, "batch": 32, "lr": 1e-3, "lr_min": 0.0,
                  "schedule": "none", "patience": 6, "weight_decay": 0.0}


def validate_config(cfg: dict):
    """Schema check plus the cross-field rules the schema cannot express."""
    jsonschema.validate(cfg, SCHEMA)
    task = cfg["task"]
    kind = task["kind"]
    if kind == "forecast" and "horizon" not in task:
        raise ValueError("forecast task requires task.horizon")
    if kind == "classify" and "n_classes" not in task:
        raise ValueError("classify task requires task.n_classes")
    if kind == "anomaly" and "dr" not in task:
        raise ValueError("anomaly task requires task.dr")
    data = cfg["data"]
    if data["kind"] in ("csv", "cache") and "path" not in data:
        raise ValueError(f"{data['kind']} data source requires data.path")
    if kind == "anomaly":
        n = data.get("n", 0)
        if n and n % task.get("dr", 1) != 0:
            raise ValueError(f"window length {n} not divisible by dr={task['dr']}")


def with_defaults(cfg: dict) -> dict:
    out = json.loads(json.dumps(cfg))
    out["task"] = {**TASK_DEFAULTS, **out.get("task", {})}
    out["model"] = {**MODEL_DEFAULTS, **out.get("model", {})}
    out["optim"] = {**OPTIM_DEFAULTS, **out.get("optim", {})}
    out.setdefault("out_dir", "runs")
    return out


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def load_config(path) -> dict:
    cfg = json.loads(Path(path).read_text())
    validate_config(cfg)
    return with_defaults(cfg)


def save_config(cfg: dict, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
