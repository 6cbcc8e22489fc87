"""Run configuration: json schema, defaults and builders for presets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .algebroid import TrivLieAlgebroid, end_model, product_with_line, tangent
from .connections import LConnection, gauge_flat, gauge_twisted_identity, identity
from .errors import InputError
from .fields import Field
from .fixtures import nilpotent, phase
from .lie import FibreMetric, VolumeElement

SCENARIOS = ("validate", "secondary", "crainic", "example", "lemma")
PRESETS = ("tangent", "example_3_3", "product_line", "gauge_flat_end2", "gauge_flat_end3")

DEFAULT_TOLERANCES = {
    "structure": 1e-10,
    "complex": 1e-10,
    "commutation": 1e-10,
    "factorization": 1e-12,
    "lemma": 1e-9,
    "cs_relative": 1e-8,
    "closedness": 1e-9,
    "flat": 1e-10,
    "relation_k1": 1e-10,
    "relation_fit": 1e-6,
    "pointwise": 1e-12,
    "residual_floor": 0.1,
    "dnabla": 1e-9,
}

_literal = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "index": {"type": "array", "items": {"type": "integer"}},
            "re": {"type": "number"},
            "im": {"type": "number"},
        },
        "required": ["index"],
        "additionalProperties": False,
    },
}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "preset": {"enum": list(PRESETS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "truncation_cap": {"type": "integer", "minimum": 1, "maximum": 64},
        "base_dim": {"type": "integer", "minimum": 1, "maximum": 3},
        "algebroid": {
            "oneOf": [
                {"type": "object",
                 "properties": {"preset": {"enum": ["tangent", "example_3_3", "end_model"]},
                                "fibre_dim": {"type": "integer", "minimum": 1, "maximum": 4}},
                 "required": ["preset"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"base_dim": {"type": "integer", "minimum": 1},
                                "rank": {"type": "integer", "minimum": 1},
                                "anchor": {"type": "array", "items": {"type": "array",
                                                                      "items": _literal}},
                                "structure": {"type": "array", "items": {
                                    "type": "array", "items": {"type": "array",
                                                               "items": _literal}}},
                                "kernel_index": {"type": "array",
                                                 "items": {"type": "integer", "minimum": 0}}},
                 "required": ["base_dim", "rank", "anchor", "structure"],
                 "additionalProperties": False},
            ]
        },
        "connection": {
            "oneOf": [
                {"type": "object", "properties": {"preset": {"const": "identity"}},
                 "required": ["preset"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"preset": {"const": "gauge_flat"}, "K": _matrix, "phi": _literal},
                 "required": ["preset", "K", "phi"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"preset": {"const": "gauge_twisted"}, "N": _matrix,
                                "phi": _literal},
                 "required": ["preset", "N", "phi"], "additionalProperties": False},
                {"type": "object", "properties": {"matrix": {"type": "array", "items": {
                    "type": "array", "items": _literal}}},
                 "required": ["matrix"], "additionalProperties": False},
            ]
        },
        "metric": _matrix,
        "volume": {"type": "number", "not": {"const": 0}},
        "tolerances": {"type": "object",
                       "propertyNames": {"enum": list(DEFAULT_TOLERANCES)},
                       "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "residual_truncations": {"type": "array", "minItems": 1,
                                 "items": {"type": "integer", "minimum": 1, "maximum": 8}},
        "samples": {"type": "integer", "minimum": 1, "maximum": 1000},
        "output": {"type": "string"},
    },
    "additionalProperties": False,
}


class SchemaError(InputError):
    """The configuration document does not match the schema."""


@dataclass
class RunConfig:
    scenario: str = "validate"
    preset: str | None = None
    seed: int = 0
    truncation_cap: int | None = None
    base_dim: int = 1
    algebroid: dict | None = None
    connection: dict | None = None
    metric: list | None = None
    volume: float = 1.0
    tolerances: dict = field(default_factory=dict)
    residual_truncations: list = field(default_factory=lambda: [1, 2, 3])
    samples: int = 10
    output: str | None = None

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def echo(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def parse_config(doc: dict) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"config invalid at {path}: {exc.message}") from None
    if "preset" not in doc and "algebroid" not in doc:
        raise SchemaError("config needs either a preset or an algebroid")
    return RunConfig(**doc)


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("config must be a json object")
    return parse_config(doc)


# -- builders ------------------------------------------------------------------------------------

def _field_grid(d: int, nested) -> Field:
    """Nested lists of field literals -> one field array."""
    if isinstance(nested, list) and nested and isinstance(nested[0], dict):
        return Field.from_literals(d, nested)
    if isinstance(nested, list) and not nested:
        return Field.from_literals(d, [])
    return Field.stack([_field_grid(d, x) for x in nested], axis=0)


def build_algebroid(cfg: RunConfig) -> TrivLieAlgebroid:
    d = cfg.base_dim
    entry = cfg.algebroid
    if entry is None:
        if cfg.preset == "tangent":
            return tangent(d)
        if cfg.preset in ("example_3_3", "product_line"):
            return end_model(d, 2)
        if cfg.preset == "gauge_flat_end2":
            return end_model(d, 2)
        if cfg.preset == "gauge_flat_end3":
            return end_model(d, 3)
        raise SchemaError(f"unknown preset {cfg.preset!r}")
    if "preset" in entry:
        if entry["preset"] == "tangent":
            return tangent(d)
        return end_model(d, entry.get("fibre_dim", 2))
    d = entry["base_dim"]
    r = entry["rank"]
    anchor = _field_grid(d, entry["anchor"])
    structure = _field_grid(d, entry["structure"])
    if anchor.vshape != (r, d) or structure.vshape != (r, r, r):
        raise SchemaError("explicit algebroid arrays do not match the declared rank")
    return TrivLieAlgebroid(anchor, structure, tuple(entry.get("kernel_index", ())),
                            name="explicit")


def build_metric(cfg: RunConfig, A: TrivLieAlgebroid) -> FibreMetric | None:
    if A.kernel_shape is None:
        return None
    n = A.kernel_shape[0]
    if cfg.metric is not None:
        h = np.asarray(cfg.metric, float)
        if h.shape != (n, n):
            raise SchemaError(f"metric must be {n} x {n}")
        return FibreMetric(h)
    if cfg.preset in ("gauge_flat_end2", "gauge_flat_end3"):
        return FibreMetric(np.eye(n) + 0.25 * np.diag(np.arange(n)) + 0.1 * (np.eye(n, k=1)
                                                                          + np.eye(n, k=-1)))
    return FibreMetric.identity(n)


def build_volume(cfg: RunConfig, A: TrivLieAlgebroid) -> VolumeElement | None:
    if A.kernel_shape is None or A.kernel_shape[0] % 2:
        return None
    return VolumeElement(A.kernel_shape[0], float(cfg.volume))


def build_connection(cfg: RunConfig, A: TrivLieAlgebroid) -> LConnection | None:
    entry = cfg.connection
    d = A.dim
    if entry is None:
        if cfg.preset in ("gauge_flat_end2", "gauge_flat_end3"):
            n = A.kernel_shape[0]
            return gauge_twisted_identity(A, nilpotent(n), phase(None, d))
        if cfg.preset in ("example_3_3", "product_line"):
            return identity(A)
        return None
    if entry.get("preset") == "identity":
        return identity(A)
    if entry.get("preset") == "gauge_flat":
        K = np.asarray(entry["K"], float)
        if A.kernel_shape != K.shape:
            raise SchemaError("gauge generator does not match the fibre")
        return gauge_flat(K, Field.from_literals(d, entry["phi"]), A=A)
    if entry.get("preset") == "gauge_twisted":
        Nm = np.asarray(entry["N"], float)
        if A.kernel_shape != Nm.shape:
            raise SchemaError("nilpotent generator does not match the fibre")
        return gauge_twisted_identity(A, Nm, Field.from_literals(d, entry["phi"]))
    M = _field_grid(d, entry["matrix"])
    if M.vshape[0] != A.rank:
        raise SchemaError("connection matrix rows must equal the rank of A")
    if M.vshape[1] == A.rank:
        return LConnection(A, A, M, "matrix")
    if M.vshape[1] == d:
        return LConnection(tangent(d), A, M, "matrix")
    raise SchemaError("connection matrix columns must match L = A or L = T(T^d)")


def build_product(A: TrivLieAlgebroid) -> TrivLieAlgebroid:
    return product_with_line(A)
