from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from polykit import PolyLog

from ordmil.qcfilter.svm import QualityControlError, svm_predict_many

if TYPE_CHECKING:
    from ordmil.dataset import Dataset, VideoBag
    from ordmil.qcfilter.svm import LinearSvm

logger = PolyLog.get_logger("ordmil.qcfilter")


@dataclass(frozen=True)
class FilterStats:
    """What a filter pass removed.

    Attributes:
        videos_before: Bags in the input dataset.
        frames_before: Frames in the input dataset.
        frames_removed: Frames predicted as artifacts and removed.
        mean_decrease_pct: Average over input videos of the percentage of frames removed.
        bags_dropped: Bags left with no frames, which are dropped.
        planted_labels_dropped: Surviving bags whose planted labels no longer reach their MES and
            were therefore discarded.
        artifact_frames_removed: Removed frames that were flagged artifacts, when flags exist.
    """

    videos_before: int
    frames_before: int
    frames_removed: int
    mean_decrease_pct: float
    bags_dropped: int
    planted_labels_dropped: int
    artifact_frames_removed: int

    def as_dict(self) -> dict[str, Any]:
        """Plain dictionary for reports."""
        return asdict(self)


def filter_dataset(dataset: Dataset, model: LinearSvm) -> tuple[Dataset, FilterStats]:
    """Remove every frame the SVM flags as an artifact.

    Surviving frames keep their order and bag labels are never changed. Bags left empty are
    dropped and counted.

    Raises:
        QualityControlError: If the model dimension does not match the dataset.
    """
    if model.dim != dataset.dim:
        msg = f"SVM dimension {model.dim} does not match dataset dimension {dataset.dim}"
        raise QualityControlError(msg)

    kept: list[VideoBag] = []
    decreases = []
    removed = dropped = planted_dropped = artifacts_removed = 0
    for bag in dataset:
        keep = svm_predict_many(model, bag.frames) < 0
        n_removed = int(bag.n_frames - keep.sum())
        removed += n_removed
        decreases.append(100.0 * n_removed / bag.n_frames)
        if bag.artifact_frames is not None:
            artifacts_removed += int(np.sum(np.asarray(bag.artifact_frames) & ~keep))

        survivor = bag.keep_frames(keep)
        if survivor is None:
            dropped += 1
            continue
        if bag.planted_frame_labels is not None and survivor.planted_frame_labels is None:
            planted_dropped += 1
        kept.append(survivor)

    stats = FilterStats(
        videos_before=len(dataset),
        frames_before=dataset.n_frames,
        frames_removed=removed,
        mean_decrease_pct=float(np.mean(decreases)) if decreases else 0.0,
        bags_dropped=dropped,
        planted_labels_dropped=planted_dropped,
        artifact_frames_removed=artifacts_removed,
    )
    logger.info(
        "Removed %d of %d frames (%.1f%% per video on average), dropped %d empty videos",
        removed,
        stats.frames_before,
        stats.mean_decrease_pct,
        dropped,
    )
    return dataset.with_bags(kept), stats
