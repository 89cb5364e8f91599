"""JSON run configuration: schema, defaults and semantic checks."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

from ..causality import Measure
from ..core import ModelConfig
from ..events import AlignmentMode, DetectionParams, EpochParams

SCHEMA_VERSION = 1

_int = {"type": "integer"}
_pos = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "pericausal run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["input", "epoch", "model", "measures"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "input": {
            "type": "object",
            "additionalProperties": False,
            "required": ["path"],
            "properties": {
                "path": {"type": "string", "minLength": 1},
                "format": {"enum": ["csv", "tct"]},
                "sampling_rate": _pos,
                "layout": {"enum": ["continuous", "epoched"]},
            },
        },
        "roles": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"cause": {**_int, "minimum": 0}, "effect": {**_int, "minimum": 0}},
        },
        "align_on": {"enum": ["cause", "effect"]},
        "detection": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["threshold_ratio"],
            "properties": {
                "threshold_ratio": _pos,
                "min_separation": {**_int, "minimum": 1},
                "alignment_mode": {"enum": [m.value for m in AlignmentMode]},
                "peak_search_halfwidth": {**_int, "minimum": 0},
                "max_events": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "epoch": {
            "type": "object",
            "additionalProperties": False,
            "required": ["window_length"],
            "properties": {
                "window_length": {**_int, "minimum": 1},
                "alignment_offset": {**_int, "minimum": 0},
                "artifact_threshold": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["order"],
            "properties": {
                "order": {**_int, "minimum": 1},
                "include_intercept": {"type": "boolean"},
                "ridge_epsilon": {"type": "number", "minimum": 0},
            },
        },
        "measures": {
            "type": "array",
            "minItems": 1,
            "uniqueItems": True,
            "items": {"enum": [m.value for m in Measure]},
        },
        "rdcs_reference_window": {
            "type": ["array", "null"],
            "items": _int,
            "minItems": 2,
            "maxItems": 2,
        },
        "rdcs_form": {"enum": ["kl", "printed"]},
        "bootstrap": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["n_boot"],
            "properties": {"n_boot": {**_int, "minimum": 2}, "seed": _int},
        },
        "output_dir": {"type": "string", "minLength": 1},
        "seed": _int,
    },
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "input": {"format": "csv", "sampling_rate": 1.0, "layout": "continuous"},
    "roles": {"cause": 1, "effect": 0},
    "align_on": "cause",
    "detection": {"min_separation": 1, "alignment_mode": "local_peak",
                  "peak_search_halfwidth": 0, "max_events": None},
    "epoch": {"alignment_offset": 0, "artifact_threshold": None},
    "model": {"include_intercept": True, "ridge_epsilon": 0.0},
    "rdcs_reference_window": None,
    "rdcs_form": "kl",
    "bootstrap": None,
    "output_dir": "results",
    "seed": 0,
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the offending JSON path."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class PipelineConfig:
    input_path: Path
    input_format: str
    sampling_rate: float
    layout: str
    cause_channel: int
    effect_channel: int
    align_on: str
    detection: Optional[DetectionParams]
    epoch: EpochParams
    model: ModelConfig
    measures: tuple
    rdcs_reference_window: Optional[tuple]
    printed_rdcs: bool
    n_boot: int
    boot_seed: int
    output_dir: Path
    seed: int
    raw: dict

    @property
    def detection_channel(self) -> int:
        return self.cause_channel if self.align_on == "cause" else self.effect_channel


def _fill(obj: dict) -> dict:
    out = copy.deepcopy(obj)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            if key not in out:
                out[key] = None if key == "detection" else {}
            if out[key] is not None:
                for k, v in default.items():
                    out[key].setdefault(k, v)
        else:
            out.setdefault(key, default)
    if out["bootstrap"] is not None:
        out["bootstrap"].setdefault("seed", out["seed"])
    return out


def _json_path(err: jsonschema.ValidationError) -> str:
    path = "$"
    for part in err.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def parse_config(obj: dict, base_dir=".") -> PipelineConfig:
    """Validate a config mapping and resolve paths against ``base_dir``."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        if err.validator == "additionalProperties":
            known = set(err.schema.get("properties", {}))
            extra = sorted(set(err.instance) - known)
            base = _json_path(err)
            raise ConfigError(f"unknown key {extra[0]!r}", f"{base}.{extra[0]}")
        if err.validator == "required":
            missing = err.message.split("'")[1]
            raise ConfigError("missing required field", f"{_json_path(err)}.{missing}")
        raise ConfigError(err.message, _json_path(err))

    cfg = _fill(obj)
    base_dir = Path(base_dir)
    inp = cfg["input"]
    layout = inp["layout"]
    if layout == "continuous" and cfg["detection"] is None:
        raise ConfigError("required for continuous input", "$.detection")
    roles = cfg["roles"]
    if roles["cause"] == roles["effect"]:
        raise ConfigError("cause and effect must be different channels", "$.roles")

    order = cfg["model"]["order"]
    ep = cfg["epoch"]
    if ep["alignment_offset"] >= ep["window_length"]:
        raise ConfigError("must be smaller than epoch.window_length", "$.epoch.alignment_offset")
    try:
        model = ModelConfig(order, cfg["model"]["include_intercept"], cfg["model"]["ridge_epsilon"])
        epoch = EpochParams(ep["window_length"], ep["alignment_offset"], order,
                            ep["artifact_threshold"])
    except ValueError as exc:
        raise ConfigError(str(exc), "$.epoch") from exc

    measures = tuple(Measure(m) for m in cfg["measures"])
    window = cfg["rdcs_reference_window"]
    if Measure.RDCS in measures:
        if window is None:
            raise ConfigError("required when measures include rDCS", "$.rdcs_reference_window")
        start, end = window
        if end <= start:
            raise ConfigError("window must satisfy start < end", "$.rdcs_reference_window")
        if end > 0:
            raise ConfigError("window must end at or before the alignment point (0)",
                              "$.rdcs_reference_window")
        if start < -ep["alignment_offset"]:
            raise ConfigError(
                f"window starts before the epoch (earliest is {-ep['alignment_offset']})",
                "$.rdcs_reference_window",
            )
        window = (int(start), int(end))

    detection = None
    if cfg["detection"] is not None:
        d = cfg["detection"]
        channel = roles["cause"] if cfg["align_on"] == "cause" else roles["effect"]
        detection = DetectionParams(channel, d["threshold_ratio"], d["min_separation"],
                                    d["alignment_mode"], d["peak_search_halfwidth"],
                                    d["max_events"])
    boot = cfg["bootstrap"]
    return PipelineConfig(
        input_path=(base_dir / inp["path"]),
        input_format=inp["format"],
        sampling_rate=float(inp["sampling_rate"]),
        layout=layout,
        cause_channel=roles["cause"],
        effect_channel=roles["effect"],
        align_on=cfg["align_on"],
        detection=detection,
        epoch=epoch,
        model=model,
        measures=measures,
        rdcs_reference_window=window,
        printed_rdcs=cfg["rdcs_form"] == "printed",
        n_boot=0 if boot is None else boot["n_boot"],
        boot_seed=cfg["seed"] if boot is None else boot["seed"],
        output_dir=base_dir / cfg["output_dir"],
        seed=cfg["seed"],
        raw=cfg,
    )


def load_config(path) -> PipelineConfig:
    """Read and validate a JSON config file; relative paths resolve next to it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", "$")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", "$") from exc
    if not isinstance(obj, dict):
        raise ConfigError("top level must be an object", "$")
    return parse_config(obj, base_dir=path.parent)
