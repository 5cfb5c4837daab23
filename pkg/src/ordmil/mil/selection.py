"""Frame scoring and representative selection within a bag."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.mil.config import TrainingError
from ordmil.scorer import forward_batch

if TYPE_CHECKING:
    from ordmil.dataset import VideoBag
    from ordmil.scorer import ScorerModel

type Scores = np.ndarray[Any, np.dtype[np.float64]]


@dataclass(frozen=True)
class Representatives:
    """Frames chosen to stand in for a bag during one training step."""

    indices: tuple[int, ...]
    targets: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def pairs(self) -> list[tuple[int, float]]:
        """(frame_index, target) pairs."""
        return list(zip(self.indices, self.targets, strict=True))


def score_bag(model: ScorerModel, bag: VideoBag) -> Scores:
    """Score every frame of a bag with the current model.

    Raises:
        TrainingError: If the bag has no frames.
    """
    if bag.n_frames == 0:
        msg = f"Video {bag.video_id!r} has no frames"
        raise TrainingError(msg)
    return forward_batch(model, bag.frames)


def argmax_frame(scores: Any) -> int:
    """Index of the highest score, lowest index on ties."""
    return int(np.argmax(np.asarray(scores)))


def top_k_frames(scores: Any, k: int) -> list[int]:
    """Indices of the min(k, F) highest scores, ties resolved toward lower indices."""
    values = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    return sorted(order[: min(k, values.shape[0])].tolist())


def select_representatives(scores: Any, binary_label: int, k: int) -> Representatives:
    """Pick the frames a bag is trained through.

    Positive bags contribute only their argmax frame (target 1). Negative bags contribute their
    min(k, F) highest-scoring frames (target 0), since every frame of a negative bag is negative.

    Raises:
        TrainingError: If there are no scores.
    """
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        msg = "Cannot select representatives from an empty bag"
        raise TrainingError(msg)

    if binary_label:
        return Representatives((argmax_frame(values),), (1.0,))

    indices = tuple(top_k_frames(values, k))
    return Representatives(indices, (0.0,) * len(indices))
