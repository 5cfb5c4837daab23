from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ordmil.scorer.losses import ScorerError
from ordmil.scorer.model import Head, ScorerModel

MODEL_FORMAT = "ordmil-scorer"
MODEL_VERSION = 1


def model_record(model: ScorerModel, config_sha256: str | None = None) -> dict[str, Any]:
    """JSON-ready representation of a model."""
    record: dict[str, Any] = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layer_dims": list(model.layer_dims),
        "head": str(model.head),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    if config_sha256 is not None:
        record["config_sha256"] = config_sha256
    return record


def save_model(model: ScorerModel, path: Path | str, config_sha256: str | None = None) -> None:
    """Write a model file. Floats keep full round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_record(model, config_sha256)) + "\n", encoding="utf-8")


def load_model(path: Path | str) -> ScorerModel:
    """Read a model file written by `save_model`.

    Raises:
        ScorerError: If the file is not a valid model file.
    """
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        msg = f"{path} is not valid JSON: {e.msg}"
        raise ScorerError(msg) from e

    if record.get("format") != MODEL_FORMAT or record.get("version") != MODEL_VERSION:
        msg = f"{path} is not a version {MODEL_VERSION} {MODEL_FORMAT} file"
        raise ScorerError(msg)

    try:
        return ScorerModel(
            layer_dims=tuple(record["layer_dims"]),
            weights=record["weights"],
            biases=record["biases"],
            head=Head(record["head"]),
        )
    except (KeyError, ValueError, TypeError) as e:
        if isinstance(e, ScorerError):
            raise
        msg = f"{path} has an invalid model record: {e}"
        raise ScorerError(msg) from e
