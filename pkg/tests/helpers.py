"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from ordmil.dataset import VideoBag
from ordmil.scorer import Head, ScorerModel


def identity_scorer(head: Head | str) -> ScorerModel:
    """Scorer on 1-D frames whose output is the frame value (linear) or its sigmoid."""
    return ScorerModel((1, 1), [np.ones((1, 1))], [np.zeros(1)], Head(head))


def logit(p: float) -> float:
    return float(np.log(p / (1 - p)))


def make_bag(values: list[float], mes: int = 0, video_id: str = "v0", subject_id: str = "s0") -> VideoBag:
    """A bag of 1-D frames."""
    return VideoBag(video_id, subject_id, mes, np.asarray(values, dtype=np.float64)[:, None])
