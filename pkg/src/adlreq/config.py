"""Pipeline configuration: JSON file, schema validation and defaults."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .chain import DEFAULT_FRACTIONS, DEFAULT_MASSES, SegmentGeometry, generate_model_stack
from .dynamics import ObjectModel
from .errors import ConfigError
from .trajectory import VelocityCaps

SCHEMA_VERSION = 1

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_positive = {"type": "number", "exclusiveMinimum": 0}
_geometry = {
    "type": "object",
    "required": ["humerus_length", "ulna_length", "hand_length"],
    "properties": {"humerus_length": _positive, "ulna_length": _positive,
                   "hand_length": _positive, "shoulder_offset": _vec3},
    "additionalProperties": False,
}
_object = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "shape": {"enum": ["cylinder", "box"]},
        "dimensions": {"type": "object", "additionalProperties": _positive},
        "masses": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "torques": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "axis": _vec3,
        "grasp_offset": _vec3,
        "supported": {"type": "boolean"},
    },
    "oneOf": [{"required": ["masses", "shape", "dimensions"]}, {"required": ["torques"]}],
    "additionalProperties": False,
}
_cap = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "geometry": _geometry,
        "subject_geometry": {"type": "object", "additionalProperties": _geometry},
        "masses": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "fractions": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                 "exclusiveMaximum": 1}, "minItems": 1},
        "cylinder_diameter": _positive,
        "objects": {"type": "object", "additionalProperties": {"type": "array",
                                                               "items": _object}},
        "bimanual_tasks": {"type": "array", "items": {"type": "string"}},
        "bimanual_share": {"type": "number", "minimum": 0, "maximum": 1},
        "velocity_caps": {"type": "object", "additionalProperties": _cap},
        "cap_percentile": {"type": "number", "exclusiveMinimum": 50, "maximum": 100},
        "filter": {"type": "object",
                   "properties": {"order": {"type": "integer", "minimum": 1},
                                  "cutoff": _positive},
                   "additionalProperties": False},
        "screening": {"type": "object",
                      "properties": {"velocity": {"type": "boolean"},
                                     "torque": {"type": "boolean"}},
                      "additionalProperties": False},
        "wrist": {"type": "object",
                  "properties": {"hand_mass": _positive,
                                 "kinds": {"type": "array",
                                           "items": {"enum": ["SO", "SNO", "DO", "DNO"]}},
                                 "grid_step": _positive,
                                 "refine": {"type": "boolean"},
                                 "caps": {"type": "array", "items": _positive,
                                          "minItems": 2, "maxItems": 2},
                                 "torque_map": {"enum": ["consistent", "direct"]}},
                  "additionalProperties": False},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
    },
    "additionalProperties": False,
}

# Grasp offsets put the object CoM in front of the palm (palm faces -Y in
# the zero pose).
_PALM = [0.0, -0.05, -0.08]

DEFAULT_OBJECTS = {
    "I": [
        {"name": "Cup", "shape": "cylinder", "dimensions": {"r": 43, "h": 100},
         "masses": [0.1, 0.5, 1], "grasp_offset": _PALM},
        {"name": "Mug", "shape": "cylinder", "dimensions": {"r": 38.5, "h": 132},
         "masses": [0.1, 0.5, 1], "grasp_offset": _PALM},
    ],
    "IV": [{"name": "Bottle", "shape": "cylinder", "dimensions": {"r": 32, "h": 213},
            "masses": [0.1, 0.5, 1, 1.5], "grasp_offset": _PALM}],
    "V": [{"name": "TinCan", "shape": "cylinder", "dimensions": {"r": 36.5, "h": 110},
           "masses": [0.1, 0.5, 1], "grasp_offset": _PALM}],
    "VI": [{"name": "Briefcase", "shape": "box", "dimensions": {"x": 450, "y": 350, "z": 110},
            "masses": [1, 3, 5], "grasp_offset": [0.0, -0.03, -0.2]}],
    "VIII": [{"name": "Door", "shape": "box", "dimensions": {"x": 40, "y": 2032, "z": 890},
              "masses": [9, 18, 33], "grasp_offset": _PALM, "supported": True}],
    "IX": [
        {"name": "Key", "torques": [0.3, 1.3, 2.3], "axis": [1.0, 0.0, 0.0]},
        {"name": "Knob", "torques": [0.3, 1.3, 2.3], "axis": [1.0, 0.0, 0.0]},
    ],
    "X": [{"name": "Box", "shape": "box", "dimensions": {"x": 340, "y": 200, "z": 130},
           "masses": [0.1, 1, 2, 5], "grasp_offset": [0.0, -0.1, -0.08]}],
}
DEFAULT_OBJECTS["II"] = copy.deepcopy(DEFAULT_OBJECTS["I"])

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "geometry": {"humerus_length": 0.30, "ulna_length": 0.25, "hand_length": 0.18,
                 "shoulder_offset": [0.0, 0.0, 0.0]},
    "subject_geometry": {},
    "masses": list(DEFAULT_MASSES),
    "fractions": list(DEFAULT_FRACTIONS),
    "cylinder_diameter": 0.10,
    "objects": DEFAULT_OBJECTS,
    "bimanual_tasks": ["X"],
    "bimanual_share": 0.5,
    "velocity_caps": {"WF": [-300.0, 300.0], "WD": [-102.0, 102.0]},
    "cap_percentile": 99.0,
    "filter": {"order": 3, "cutoff": 6.0},
    "screening": {"velocity": True, "torque": True},
    "wrist": {"hand_mass": 0.5, "kinds": ["SO", "SNO", "DO", "DNO"], "grid_step": 1.0,
              "refine": True, "caps": [300.0, 102.0], "torque_map": "consistent"},
    "output_dir": "out",
    "seed": 0,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "objects":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        data = _merge(DEFAULTS, raw)
        cfg = cls(data)
        # geometry, stack, caps and object errors surface before any computation
        for subject in [None, *cfg.data["subject_geometry"]]:
            try:
                generate_model_stack(cfg.geometry(subject), cfg.data["masses"],
                                     cfg.data["fractions"], cfg.data["cylinder_diameter"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        cfg.caps_overrides()
        cfg.objects()
        return cfg

    @classmethod
    def load(cls, path=None) -> "PipelineConfig":
        if path is None:
            return cls.from_dict({"schema_version": SCHEMA_VERSION})
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)

    def __getitem__(self, key):
        return self.data[key]

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def geometry(self, subject: str | None = None) -> SegmentGeometry:
        raw = self.data["subject_geometry"].get(subject) if subject else None
        try:
            return SegmentGeometry.from_dict(raw or self.data["geometry"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def mean_lengths(self) -> dict:
        geoms = [SegmentGeometry.from_dict(g) for g in self.data["subject_geometry"].values()]
        geoms = geoms or [self.geometry()]
        return {"humerus": sum(g.humerus_length for g in geoms) / len(geoms),
                "ulna": sum(g.ulna_length for g in geoms) / len(geoms)}

    def caps_overrides(self) -> dict:
        limits = {k: tuple(v) for k, v in self.data["velocity_caps"].items()}
        try:
            VelocityCaps(limits)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return limits

    def objects(self, task: str | None = None) -> list:
        """Object variants (one per mass or torque) for ``task`` or all tasks."""
        tasks = [task] if task is not None else sorted(self.data["objects"])
        out = []
        for t in tasks:
            for spec in self.data["objects"].get(t, []):
                common = {"name": spec["name"], "shape": spec.get("shape"),
                          "dimensions": spec.get("dimensions", {}),
                          "axis": tuple(spec.get("axis", (1.0, 0.0, 0.0))),
                          "grasp_offset": tuple(spec.get("grasp_offset", (0.0, 0.0, 0.0))),
                          "supported": spec.get("supported", False)}
                try:
                    for m in spec.get("masses", []):
                        out.append(ObjectModel(mass=float(m), **common))
                    for tq in spec.get("torques", []):
                        out.append(ObjectModel(static_torque=float(tq), **common))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        return out
