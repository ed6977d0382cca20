"""Versioned on-disk model documents.

A model file is a single JSON document: format version, architecture
descriptor, scenario/scaling metadata, and the layer arrays row-major at
full double precision (floats are serialized via repr, which round-trips
bit-exactly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .mdn import Architecture, NetworkWeights

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelMeta:
    """Unit-frame and provenance metadata stored with the weights."""

    scenario: str
    scaling_coef: float
    d_max: float
    seed: int


def save_model(weights: NetworkWeights, meta: ModelMeta, path: str | Path) -> None:
    weights.validate()
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "architecture": {
            "num_layers": weights.arch.num_layers,
            "num_units": weights.arch.num_units,
            "m_c": weights.arch.m_c,
            "input_dim": weights.arch.input_dim,
            "sigma_transform": weights.arch.sigma_transform,
        },
        "metadata": {
            "scenario": meta.scenario,
            "scaling_coef": meta.scaling_coef,
            "d_max": meta.d_max,
            "seed": meta.seed,
        },
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist()} for w, b in weights.layers
        ],
    }
    Path(path).write_text(
        json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path) -> tuple[NetworkWeights, ModelMeta]:
    """Parse and fully re-validate a model document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: not a valid model document: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise DataFormatError(f"{path}: missing format_version")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported model format version {doc['format_version']!r}"
        )
    try:
        arch = Architecture(**doc["architecture"])
        meta_doc = doc["metadata"]
        meta = ModelMeta(
            scenario=str(meta_doc["scenario"]),
            scaling_coef=float(meta_doc["scaling_coef"]),
            d_max=float(meta_doc["d_max"]),
            seed=int(meta_doc["seed"]),
        )
        layers = [
            (np.asarray(layer["weights"], dtype=float),
             np.asarray(layer["bias"], dtype=float))
            for layer in doc["layers"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed model document: {exc}") from None
    weights = NetworkWeights(layers=layers, arch=arch)
    try:
        weights.validate()
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return weights, meta
