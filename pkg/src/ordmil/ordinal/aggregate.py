"""Aggregation of ranked binary probabilities into ordinal classes.

A frame triple holds the three member probabilities (p>0, p>1, p>2). Triples are not required to
be monotone. Three rules turn a triple into a class:

- Convert: difference the cumulative probabilities into four class probabilities and take the
  argmax (lowest class on ties). Non-monotone triples give negative entries, which are kept.
- Threshold: compare each probability with its member threshold (>=) and count the positives.
- Sum: add the probabilities into a score in [0, 3], then bin it with ordinal thresholds.

A video's class is the maximum class over its frames.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.ordinal.thresholds import ThresholdError

if TYPE_CHECKING:
    from collections.abc import Iterable

    from ordmil.ordinal.thresholds import BinaryThresholds, OrdinalThresholds

type FrameTriple = tuple[float, float, float]
type TripleArray = np.ndarray[Any, np.dtype[np.float64]]


def _as_triples(triples: Any) -> TripleArray:
    values = np.asarray(triples, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != 3:
        msg = f"Expected an (n, 3) array of frame triples, got shape {values.shape}"
        raise ThresholdError(msg)
    if not np.all((values >= 0.0) & (values <= 1.0)):
        msg = "Frame triple probabilities must lie in [0, 1]"
        raise ThresholdError(msg)
    return values


def convert_probabilities(triples: Any) -> TripleArray:
    """Class probabilities (n, 4) from cumulative triples (n, 3). Rows sum to 1."""
    t = _as_triples(triples)
    return np.column_stack([1.0 - t[:, 0], t[:, 0] - t[:, 1], t[:, 1] - t[:, 2], t[:, 2]])


def classes_convert(triples: Any) -> np.ndarray:
    """Convert-rule class of every triple."""
    return np.argmax(convert_probabilities(triples), axis=1)


def classes_threshold(triples: Any, thresholds: BinaryThresholds) -> np.ndarray:
    """Threshold-rule class of every triple."""
    t = _as_triples(triples)
    return np.sum(t >= np.asarray(thresholds.as_tuple()), axis=1)


def scores_sum(triples: Any) -> np.ndarray:
    """Sum-rule score of every triple."""
    return _as_triples(triples).sum(axis=1)


def bin_ordinal_many(scores: Any, thresholds: OrdinalThresholds) -> np.ndarray:
    """Bin continuous scores with left-closed upper bins: score == t_i falls in the bin above."""
    values = np.asarray(scores, dtype=np.float64)
    return np.sum(values[..., None] >= np.asarray(thresholds.as_tuple()), axis=-1)


def aggregate_convert(triple: FrameTriple) -> tuple[int, tuple[float, float, float, float]]:
    """Class and class probabilities of one triple under the Convert rule."""
    probs = convert_probabilities([triple])[0]
    return int(np.argmax(probs)), (float(probs[0]), float(probs[1]), float(probs[2]), float(probs[3]))


def aggregate_threshold(triple: FrameTriple, thresholds: BinaryThresholds) -> int:
    """Class of one triple under the Threshold rule."""
    return int(classes_threshold([triple], thresholds)[0])


def aggregate_sum(triple: FrameTriple) -> float:
    """Sum-rule score q = p>0 + p>1 + p>2."""
    return float(scores_sum([triple])[0])


def bin_ordinal(score: float, thresholds: OrdinalThresholds) -> int:
    """Ordinal class of one continuous score."""
    return int(bin_ordinal_many([score], thresholds)[0])


def video_class(frame_classes: Iterable[int]) -> int:
    """Video class as the maximum frame class.

    Raises:
        ThresholdError: If there are no frame classes.
    """
    classes = list(frame_classes)
    if not classes:
        msg = "Cannot take the video class of an empty frame list"
        raise ThresholdError(msg)
    return int(max(classes))
