"""Ranked binary ensemble and the per-frame score dump.

Member m of the ensemble (named gt0, gt1 and gt2) is a sigmoid scorer trained on the binary task
"MES > m". The members are trained independently and only meet at aggregation time.
"""

from __future__ import annotations

import csv
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
import tomlkit
from polykit import PolyLog

from ordmil.dataset import relabel_binary
from ordmil.mil import EpochRecord, TrainConfig, score_bag, train_binary_mil
from ordmil.ordinal.aggregate import (
    bin_ordinal,
    bin_ordinal_many,
    classes_convert,
    classes_threshold,
    scores_sum,
)
from ordmil.ordinal.thresholds import ThresholdError
from ordmil.scorer import Head, ScorerError, ScorerModel, clip_score, load_model, save_model

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from ordmil.dataset import Dataset, VideoBag
    from ordmil.ordinal.thresholds import BinaryThresholds, OrdinalThresholds

logger = PolyLog.get_logger("ordmil.ordinal")

MEMBER_NAMES = ("gt0", "gt1", "gt2")
ENSEMBLE_FILE = "ensemble.toml"

FRAME_SCORE_COLUMNS = (
    "video_id",
    "frame_index",
    "p_gt0",
    "p_gt1",
    "p_gt2",
    "q",
    "class_convert",
    "class_threshold",
    "class_sum",
)
REGRESSION_COLUMNS = ("s_regression", "class_regression")


@dataclass(eq=False)
class EnsembleModel:
    """The three ranked binary scorers φ>0, φ>1, φ>2 and the K each was trained with.

    Training traces are kept for reporting but are not part of equality.
    """

    members: tuple[ScorerModel, ScorerModel, ScorerModel]
    k_values: tuple[int, int, int]
    traces: tuple[list[EpochRecord], ...] = field(default=())

    def __post_init__(self):
        self.members = tuple(self.members)  # type: ignore[assignment]
        self.k_values = tuple(int(k) for k in self.k_values)  # type: ignore[assignment]
        if len(self.members) != 3 or len(self.k_values) != 3:
            msg = "An ensemble has exactly three members and three K values"
            raise ScorerError(msg)
        if any(m.head is not Head.SIGMOID for m in self.members):
            msg = "Ensemble members must have sigmoid heads"
            raise ScorerError(msg)
        if len({m.input_dim for m in self.members}) != 1:
            msg = "Ensemble members must share an input dimension"
            raise ScorerError(msg)

    @property
    def input_dim(self) -> int:
        """Shared frame dimension."""
        return self.members[0].input_dim

    def score_frames(self, bag: VideoBag) -> np.ndarray:
        """(F, 3) member probabilities for every frame of a bag."""
        return np.column_stack([score_bag(member, bag) for member in self.members])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EnsembleModel):
            return NotImplemented
        return self.k_values == other.k_values and all(
            a == b for a, b in zip(self.members, other.members, strict=True)
        )


def train_ensemble(
    dataset: Dataset, configs: Sequence[TrainConfig], progress: bool = False
) -> EnsembleModel:
    """Train the three ranked members, each on its own binary relabeling of the dataset.

    Raises:
        ThresholdError: If there are not exactly three configs.
    """
    if len(configs) != 3:
        msg = f"train_ensemble needs three member configs, got {len(configs)}"
        raise ThresholdError(msg)

    results = []
    for m, config in enumerate(configs):
        logger.debug("Training member %s with K=%d", MEMBER_NAMES[m], config.k_negative)
        results.append(train_binary_mil(relabel_binary(dataset, m), config, progress=progress))

    return EnsembleModel(
        members=(results[0].model, results[1].model, results[2].model),
        k_values=(configs[0].k_negative, configs[1].k_negative, configs[2].k_negative),
        traces=tuple(r.trace for r in results),
    )


def save_ensemble(ensemble: EnsembleModel, directory: Path | str, config_sha256: str | None = None) -> None:
    """Write the members as gt0.json, gt1.json and gt2.json, with their K values in ensemble.toml."""
    directory = Path(directory)
    for name, member in zip(MEMBER_NAMES, ensemble.members, strict=True):
        save_model(member, directory / f"{name}.json", config_sha256)
    doc = tomlkit.document()
    doc["k_values"] = list(ensemble.k_values)
    (directory / ENSEMBLE_FILE).write_text(tomlkit.dumps(doc), encoding="utf-8")


def load_ensemble(directory: Path | str) -> EnsembleModel:
    """Read an ensemble written by `save_ensemble`.

    Raises:
        ScorerError: If a member file or the K values are missing or invalid.
    """
    directory = Path(directory)
    members = [load_model(directory / f"{name}.json") for name in MEMBER_NAMES]
    try:
        data = tomllib.loads((directory / ENSEMBLE_FILE).read_text(encoding="utf-8"))
        k0, k1, k2 = (int(k) for k in data["k_values"])
    except (tomllib.TOMLDecodeError, KeyError, TypeError, ValueError) as e:
        msg = f"Invalid K values in {directory / ENSEMBLE_FILE}: {e}"
        raise ScorerError(msg) from e
    return EnsembleModel((members[0], members[1], members[2]), (k0, k1, k2))


class EnsemblePrediction(NamedTuple):
    """Video classes under the three aggregation rules."""

    class_convert: int
    class_threshold: int
    class_sum: int
    q_v: float  # maximum frame Sum score


def predict_video_ensemble(
    ensemble: EnsembleModel,
    bag: VideoBag,
    binary_thresholds: BinaryThresholds,
    sum_thresholds: OrdinalThresholds,
) -> EnsemblePrediction:
    """Aggregate frame triples with every rule and lift each to the video by max."""
    triples = ensemble.score_frames(bag)
    q_v = float(scores_sum(triples).max())
    return EnsemblePrediction(
        class_convert=int(classes_convert(triples).max()),
        class_threshold=int(classes_threshold(triples, binary_thresholds).max()),
        class_sum=bin_ordinal(q_v, sum_thresholds),
        q_v=q_v,
    )


def predict_video_regression(
    model: ScorerModel, bag: VideoBag, thresholds: OrdinalThresholds
) -> tuple[float, int]:
    """Severity of a video from its highest raw frame score, clipped to [0, 3], and its class.

    Raises:
        ScorerError: If the model does not have a linear head.
    """
    if model.head is not Head.LINEAR:
        msg = "Regression prediction needs a linear-head scorer"
        raise ScorerError(msg)
    s_v = clip_score(float(score_bag(model, bag).max()))
    return s_v, bin_ordinal(s_v, thresholds)


def video_scores_regression(model: ScorerModel, bags: Iterable[VideoBag]) -> list[float]:
    """Clipped video severity s_v of every bag, the input to ordinal threshold tuning."""
    return [clip_score(float(score_bag(model, bag).max())) for bag in bags]


def frame_score_rows(
    ensemble: EnsembleModel,
    bags: Iterable[VideoBag],
    binary_thresholds: BinaryThresholds,
    sum_thresholds: OrdinalThresholds,
    regression: ScorerModel | None = None,
    regression_thresholds: OrdinalThresholds | None = None,
) -> list[list[object]]:
    """Rows of the per-frame score dump, one per frame.

    The regression columns are included when a regression model and its thresholds are given.
    """
    with_regression = regression is not None and regression_thresholds is not None
    rows: list[list[object]] = []
    for bag in bags:
        triples = ensemble.score_frames(bag)
        q = scores_sum(triples)
        convert = classes_convert(triples)
        threshold = classes_threshold(triples, binary_thresholds)
        binned = bin_ordinal_many(q, sum_thresholds)
        if with_regression:
            raw = score_bag(regression, bag)  # type: ignore[arg-type]
            s = np.clip(raw, 0.0, 3.0)
            s_classes = bin_ordinal_many(s, regression_thresholds)  # type: ignore[arg-type]

        for i in range(bag.n_frames):
            row: list[object] = [
                bag.video_id,
                i,
                *(repr(float(p)) for p in triples[i]),
                repr(float(q[i])),
                int(convert[i]),
                int(threshold[i]),
                int(binned[i]),
            ]
            if with_regression:
                row += [repr(float(s[i])), int(s_classes[i])]
            rows.append(row)
    return rows


def write_frame_scores(rows: Sequence[Sequence[object]], path: Path | str) -> None:
    """Write the per-frame score dump as a delimited table with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(FRAME_SCORE_COLUMNS)
    if rows and len(rows[0]) > len(header):
        header += REGRESSION_COLUMNS
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
