"""Bag and frame data model for weakly labeled videos.

A video is a bag of frames, and only the bag carries a label (its MES). Frames are feature vectors
stored as rows of a float64 matrix. Synthetic bags additionally carry the planted per-frame labels
they were generated from, which is what makes frame-level evaluation possible without raters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.errors import OrdmilError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator

type FrameVec = np.ndarray[Any, np.dtype[np.float64]]
type FrameMatrix = np.ndarray[Any, np.dtype[np.float64]]

N_CLASSES = 4
MAX_MES = N_CLASSES - 1


class DatasetError(OrdmilError):
    """Raised when bags, datasets or synthetic specs violate their invariants."""


@dataclass(frozen=True, eq=False)
class VideoBag:
    """One weakly labeled video.

    Attributes:
        video_id: Unique identifier of the video within its dataset.
        subject_id: The subject the video belongs to. Folds never split a subject.
        mes: The video-level severity label in 0..3.
        frames: Frame feature matrix of shape (F, d), F >= 1.
        planted_frame_labels: Optional per-frame ground truth; its max must equal `mes`.
        artifact_frames: Optional per-frame flags marking planted imaging artifacts.
    """

    video_id: str
    subject_id: str
    mes: int
    frames: FrameMatrix
    planted_frame_labels: tuple[int, ...] | None = None
    artifact_frames: tuple[bool, ...] | None = None

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            msg = f"Video {self.video_id!r} must have at least one frame of shape (F, d)"
            raise DatasetError(msg)
        if not np.all(np.isfinite(frames)):
            msg = f"Video {self.video_id!r} has non-finite frame features"
            raise DatasetError(msg)
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

        if self.mes not in range(N_CLASSES):
            msg = f"Video {self.video_id!r} has MES {self.mes}, expected 0..{MAX_MES}"
            raise DatasetError(msg)

        if self.planted_frame_labels is not None:
            labels = tuple(int(label) for label in self.planted_frame_labels)
            if len(labels) != self.n_frames:
                msg = f"Video {self.video_id!r} has {len(labels)} planted labels for {self.n_frames} frames"
                raise DatasetError(msg)
            if any(label not in range(N_CLASSES) for label in labels):
                msg = f"Video {self.video_id!r} has planted labels outside 0..{MAX_MES}"
                raise DatasetError(msg)
            if max(labels) != self.mes:
                msg = f"Video {self.video_id!r} has planted max {max(labels)} but MES {self.mes}"
                raise DatasetError(msg)
            object.__setattr__(self, "planted_frame_labels", labels)

        if self.artifact_frames is not None:
            flags = tuple(bool(flag) for flag in self.artifact_frames)
            if len(flags) != self.n_frames:
                msg = f"Video {self.video_id!r} has {len(flags)} artifact flags for {self.n_frames} frames"
                raise DatasetError(msg)
            object.__setattr__(self, "artifact_frames", flags)

    @property
    def n_frames(self) -> int:
        """Number of frames F in the bag."""
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        """Feature dimension d of the frames."""
        return int(self.frames.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VideoBag):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and self.subject_id == other.subject_id
            and self.mes == other.mes
            and self.planted_frame_labels == other.planted_frame_labels
            and self.artifact_frames == other.artifact_frames
            and np.array_equal(self.frames, other.frames)
        )

    def keep_frames(self, mask: Iterable[bool]) -> VideoBag | None:
        """Return a copy holding only the frames where `mask` is True, in their original order.

        Returns None when no frame survives. If the surviving planted labels no longer reach
        `mes`, the planted labels are dropped rather than the bag label changed.
        """
        keep = np.fromiter(mask, dtype=bool, count=self.n_frames)
        if not keep.any():
            return None

        planted = None
        if self.planted_frame_labels is not None:
            survivors = tuple(np.asarray(self.planted_frame_labels)[keep].tolist())
            planted = survivors if max(survivors) == self.mes else None

        artifacts = None
        if self.artifact_frames is not None:
            artifacts = tuple(np.asarray(self.artifact_frames)[keep].tolist())

        return VideoBag(
            video_id=self.video_id,
            subject_id=self.subject_id,
            mes=self.mes,
            frames=self.frames[keep],
            planted_frame_labels=planted,
            artifact_frames=artifacts,
        )


@dataclass(frozen=True)
class Dataset:
    """A collection of bags sharing one feature dimension."""

    dim: int
    bags: tuple[VideoBag, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dim < 1:
            msg = f"Dataset dimension must be positive, got {self.dim}"
            raise DatasetError(msg)
        bags = tuple(self.bags)
        object.__setattr__(self, "bags", bags)

        seen: set[str] = set()
        for bag in bags:
            if bag.dim != self.dim:
                msg = f"Video {bag.video_id!r} has dimension {bag.dim}, dataset declares {self.dim}"
                raise DatasetError(msg)
            if bag.video_id in seen:
                msg = f"Duplicate video id {bag.video_id!r}"
                raise DatasetError(msg)
            seen.add(bag.video_id)

    def __len__(self) -> int:
        return len(self.bags)

    def __iter__(self) -> Iterator[VideoBag]:
        return iter(self.bags)

    @property
    def n_frames(self) -> int:
        """Total number of frames across all bags."""
        return sum(bag.n_frames for bag in self.bags)

    def class_histogram(self) -> list[int]:
        """Count bags per MES class, index = class."""
        counts = Counter(bag.mes for bag in self.bags)
        return [counts.get(mes, 0) for mes in range(N_CLASSES)]

    def subjects(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        return list(dict.fromkeys(bag.subject_id for bag in self.bags))

    def subset(self, video_ids: Iterable[str]) -> Dataset:
        """Return a dataset with only the given videos, keeping the original bag order."""
        wanted = set(video_ids)
        return Dataset(self.dim, tuple(bag for bag in self.bags if bag.video_id in wanted))

    def with_bags(self, bags: Iterable[VideoBag]) -> Dataset:
        """Return a dataset with the same dimension and a new bag list."""
        return Dataset(self.dim, tuple(bags))


def relabel_binary(dataset: Dataset | Iterable[VideoBag], m: int) -> list[tuple[VideoBag, int]]:
    """Relabel bags for the ranked binary task "MES greater than m".

    Raises:
        DatasetError: If m is not one of 0, 1 or 2.
    """
    if m not in range(MAX_MES):
        msg = f"Ranked task threshold must be in 0..{MAX_MES - 1}, got {m}"
        raise DatasetError(msg)
    return [(bag, int(bag.mes > m)) for bag in dataset]
