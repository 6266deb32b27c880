"""JSON experiment configuration.

Background errors and noise levels are given in percent in the file and
converted to fractions on load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .certify import THEOREMS
from .geometry import FACES, GeometryError, build_mesh, build_partition, build_patches
from .monotests import ALUMINIUM, MAKROLON, MaterialSpec, SpecError
from .ntd import ForwardModel


class ConfigError(ValueError):
    pass


PRESETS = {
    "table1": (MAKROLON, ALUMINIUM),
    "table1-softer": (ALUMINIUM, MAKROLON),
}

VARIANT_ALIASES = {"Alg1": "T4.1", "Alg2": "T4.2", "Alg3": "T4.3", "Alg4": "T4.4"}

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "materials"],
    "properties": {
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "p", "q"],
            "properties": {
                "n": _count,
                "p": _count,
                "q": _count,
                "traction": _num,
                "length": _pos,
                "dirichlet_face": {"enum": sorted(FACES)},
            },
        },
        "materials": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": sorted(PRESETS)},
                "background": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "inclusion": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
                "lambda0": _pos,
                "mu0": _pos,
                "c_lambda": _nonneg,
                "c_mu": _nonneg,
                "direction": {"enum": ["stiffer", "softer"]},
                "lambda_max": _pos,
                "mu_max": _pos,
            },
        },
        "eps_lambda_percent": _nonneg,
        "eps_mu_percent": _nonneg,
        "variant": {"enum": sorted(THEOREMS) + sorted(VARIANT_ALIASES)},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eps_lambda_percent", "eps_mu_percent"],
            "properties": {
                "eps_lambda_percent": {"type": "array", "items": _nonneg, "minItems": 1},
                "eps_mu_percent": {"type": "array", "items": _nonneg, "minItems": 1},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta_percent": _nonneg,
                "eta_fraction_of_max": _nonneg,
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "pixels": {"type": "array", "items": {"type": "integer", "minimum": 0}, "uniqueItems": True},
                "at_bound": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
                "empty_probability": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lemma_n": _count,
                "lemma_q": _count,
                "lemma_trials": {"type": "integer"},
                "soundness_trials": {"type": "integer"},
                "eta_fraction_of_max": _nonneg,
            },
        },
        "reference_norm": {"oneOf": [{"const": "background"}, _pos]},
        "threads": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}


def _key_path(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{path}: {err.message}"


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("invalid config: " + "; ".join(_key_path(e) for e in errors))


def canonical_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def load(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    validate(raw)
    return raw


def material_spec(raw: dict) -> MaterialSpec:
    m = raw["materials"]
    eps_lam = raw.get("eps_lambda_percent", 0.0) / 100
    eps_mu = raw.get("eps_mu_percent", 0.0) / 100
    caps = {}
    if "lambda_max" in m:
        caps["lam_max"] = m["lambda_max"]
    if "mu_max" in m:
        caps["mu_max"] = m["mu_max"]
    try:
        if "preset" in m or "background" in m:
            if "preset" in m and "background" in m:
                raise ConfigError("materials: give either 'preset' or 'background'/'inclusion', not both")
            if "preset" in m:
                bg, inc = PRESETS[m["preset"]]
            else:
                if "inclusion" not in m:
                    raise ConfigError("materials.inclusion: required with 'background'")
                bg, inc = m["background"], m["inclusion"]
            return MaterialSpec.from_materials(bg, inc, eps_lam=eps_lam, eps_mu=eps_mu, **caps)
        missing = [k for k in ("lambda0", "mu0", "c_lambda", "c_mu", "direction") if k not in m]
        if missing:
            raise ConfigError(f"materials.{missing[0]}: required for an explicit material spec")
        return MaterialSpec(m["lambda0"], m["mu0"], m["c_lambda"], m["c_mu"], m["direction"],
                            eps_lam, eps_mu, caps.get("lam_max"), caps.get("mu_max"))
    except SpecError as exc:
        raise ConfigError(f"materials: {exc}") from exc


def variant(raw: dict, spec: MaterialSpec) -> str:
    default = "T4.3" if spec.stiffer else "T4.4"
    tag = raw.get("variant", default)
    tag = VARIANT_ALIASES.get(tag, tag)
    if THEOREMS[tag][1] != spec.direction:
        raise ConfigError(f"variant: {tag} does not apply to {spec.direction} inclusions")
    return tag


@dataclass(frozen=True, eq=False)
class Setup:
    raw: dict
    spec: MaterialSpec
    theorem: str
    model: ForwardModel
    partition: object

    @property
    def method(self) -> str:
        return THEOREMS[self.theorem][0]

    @property
    def reference_norm(self):
        ref = self.raw.get("reference_norm", "background")
        return None if ref == "background" else float(ref)


def build(raw: dict) -> Setup:
    g = raw["geometry"]
    try:
        mesh = build_mesh(g["n"], g.get("length", 1.0), g.get("dirichlet_face", "z0"))
        partition = build_partition(mesh, g["p"])
        layout = build_patches(mesh, g["q"], g.get("traction", 1.0))
    except GeometryError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    spec = material_spec(raw)
    return Setup(raw, spec, variant(raw, spec), ForwardModel(layout), partition)
