from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

from ordmil.mil.selection import argmax_frame, score_bag
from ordmil.scorer import Head, ScorerError

if TYPE_CHECKING:
    from collections.abc import Iterable

    from ordmil.dataset import VideoBag
    from ordmil.scorer import ScorerModel


class BinaryPrediction(NamedTuple):
    """Video-level output of a binary scorer."""

    p_v: float  # highest frame probability
    frame: int  # index of that frame
    label: int


def predict_video_binary(model: ScorerModel, bag: VideoBag, threshold: float) -> BinaryPrediction:
    """Predict a video's binary label from its highest frame probability.

    The label is 1 when p_v >= threshold.

    Raises:
        ScorerError: If the model does not have a sigmoid head.
    """
    if model.head is not Head.SIGMOID:
        msg = "Binary video prediction needs a sigmoid-head scorer"
        raise ScorerError(msg)
    scores = score_bag(model, bag)
    frame = argmax_frame(scores)
    p_v = float(scores[frame])
    return BinaryPrediction(p_v, frame, int(p_v >= threshold))


def video_scores_binary(model: ScorerModel, bags: Iterable[VideoBag]) -> list[float]:
    """Max frame probability of each video, the score used for ROC AUC."""
    return [float(score_bag(model, bag).max()) for bag in bags]
