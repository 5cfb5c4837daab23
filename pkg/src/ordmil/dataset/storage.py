"""Line-delimited JSON persistence for datasets.

The first line is a header record carrying the format version and feature dimension. Each
following line is one bag. Floats are written in Python's shortest round-trip form, so a saved
dataset loads back bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ordmil.dataset.bags import Dataset, DatasetError, VideoBag

DATASET_FORMAT = "ordmil-dataset"
DATASET_VERSION = 1


class DatasetFormatError(DatasetError):
    """Raised when a dataset file has a malformed record."""

    def __init__(self, path: Path, line: int, problem: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {problem}")


def bag_record(bag: VideoBag) -> dict[str, Any]:
    """Convert a bag into its JSON record."""
    record: dict[str, Any] = {
        "video_id": bag.video_id,
        "subject_id": bag.subject_id,
        "mes": bag.mes,
        "frames": bag.frames.tolist(),
    }
    if bag.planted_frame_labels is not None:
        record["planted_frame_labels"] = list(bag.planted_frame_labels)
    if bag.artifact_frames is not None:
        record["artifact_frames"] = list(bag.artifact_frames)
    return record


def save_dataset(dataset: Dataset, path: Path | str, config_sha256: str | None = None) -> None:
    """Write a dataset to a line-delimited JSON file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: dict[str, Any] = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "dim": dataset.dim,
    }
    if config_sha256 is not None:
        header["config_sha256"] = config_sha256

    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for bag in dataset:
            f.write(json.dumps(bag_record(bag)) + "\n")


def load_dataset(path: Path | str) -> Dataset:
    """Read a dataset written by `save_dataset`.

    Raises:
        DatasetFormatError: If any record is malformed, naming the offending line.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        lines = f.read().splitlines()

    if not lines:
        raise DatasetFormatError(path, 1, "missing header record")

    header = _parse_json(path, 1, lines[0])
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise DatasetFormatError(path, 1, "unsupported format or version")
    dim = header.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise DatasetFormatError(path, 1, f"invalid dim {dim!r}")

    bags = []
    seen: set[str] = set()
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        record = _parse_json(path, number, line)
        bag = _parse_bag(path, number, record, dim)
        if bag.video_id in seen:
            raise DatasetFormatError(path, number, f"duplicate video id {bag.video_id!r}")
        seen.add(bag.video_id)
        bags.append(bag)

    return Dataset(dim, tuple(bags))


def _parse_json(path: Path, number: int, line: str) -> dict[str, Any]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(path, number, f"invalid JSON ({e.msg})") from e
    if not isinstance(record, dict):
        raise DatasetFormatError(path, number, "record is not an object")
    return record


def _parse_bag(path: Path, number: int, record: dict[str, Any], dim: int) -> VideoBag:
    missing = [key for key in ("video_id", "subject_id", "mes", "frames") if key not in record]
    if missing:
        raise DatasetFormatError(path, number, f"missing fields {missing}")

    mes = record["mes"]
    if not isinstance(mes, int) or isinstance(mes, bool):
        raise DatasetFormatError(path, number, f"mes must be an integer, got {mes!r}")

    frames = record["frames"]
    if not isinstance(frames, list) or any(
        not isinstance(row, list) or len(row) != dim for row in frames
    ):
        raise DatasetFormatError(path, number, f"frames must be a list of length-{dim} vectors")

    try:
        return VideoBag(
            video_id=str(record["video_id"]),
            subject_id=str(record["subject_id"]),
            mes=mes,
            frames=frames,
            planted_frame_labels=record.get("planted_frame_labels"),
            artifact_frames=record.get("artifact_frames"),
        )
    except (DatasetError, TypeError, ValueError) as e:
        raise DatasetFormatError(path, number, str(e)) from e
