"""Frame-label consistency tools for multi-rater studies.

A frame cannot be more severe than the video it comes from, so each frame rating is first capped
at the video's label, then the raters' capped labels are combined by majority vote.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ordmil.dataset import N_CLASSES
from ordmil.metrics.agreement import MetricError, RatingTable

if TYPE_CHECKING:
    from collections.abc import Sequence


def adjust_frame_label(frame_label: int, video_label: int) -> int:
    """Cap a frame label at its video label."""
    return min(int(frame_label), int(video_label))


def majority_consensus(ratings: Sequence[int], n_classes: int = N_CLASSES) -> int:
    """Modal rating, ties broken toward the lower class.

    Raises:
        MetricError: If there are no ratings.
    """
    values = np.asarray(ratings, dtype=np.int64)
    if values.size == 0:
        msg = "Cannot take a consensus of zero ratings"
        raise MetricError(msg)
    return int(np.argmax(np.bincount(values, minlength=n_classes)))


def consensus_labels(table: RatingTable, video_labels: Sequence[int]) -> list[int]:
    """Consensus frame labels: cap every rating at its video label, then take the majority.

    Raises:
        MetricError: If there is not one video label per rated frame.
    """
    videos = np.asarray(video_labels, dtype=np.int64)
    if videos.shape != (table.n_items,):
        msg = f"Got {videos.size} video labels for {table.n_items} rated frames"
        raise MetricError(msg)

    capped = np.minimum(table.ratings, videos[:, None])
    return [majority_consensus(row, table.n_classes) for row in capped]


def exceeding_fraction(frame_labels: Sequence[int], video_labels: Sequence[int]) -> float:
    """Share of frame labels that exceed the label of their video.

    Raises:
        MetricError: If the inputs are empty or differ in length.
    """
    frames = np.asarray(frame_labels, dtype=np.int64)
    videos = np.asarray(video_labels, dtype=np.int64)
    if frames.size == 0 or frames.shape != videos.shape:
        msg = "Need equally long, non-empty frame and video label sequences"
        raise MetricError(msg)
    return float(np.mean(frames > videos))
