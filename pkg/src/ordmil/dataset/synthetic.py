"""Synthetic weakly labeled videos with planted frame-level severities.

Each frame gets a planted label no greater than its video's MES, with exactly one frame forced to
the MES itself and higher labels made geometrically rarer, so severe activity can be confined to a
small part of the video. Frame features are drawn around class anchors spaced evenly along one
seeded direction, which keeps severity linearly recoverable from the features.

Optionally a share of frames is replaced by imaging artifacts: a separate cluster that sits high
on the severity axis, so a scorer trained on unfiltered data learns to mistake it for severe
disease unless the quality-control filter removes it first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ordmil.dataset.bags import N_CLASSES, Dataset, DatasetError, VideoBag

# Position of the artifact cluster in units of class separation
ARTIFACT_SEVERITY_OFFSET = 2.5
ARTIFACT_ORTHOGONAL_OFFSET = 2.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for generating a synthetic dataset.

    Attributes:
        n_videos: Number of videos (bags) to generate.
        frames_min: Minimum frames per video.
        frames_max: Maximum frames per video (inclusive).
        dim: Feature dimension d.
        class_mix: Relative weights of MES 0..3 among videos.
        frame_severity_decay: Ratio between the sampling weights of consecutive frame labels. Lower
            values make frames at the video's MES rarer.
        noise_std: Standard deviation of the Gaussian feature noise.
        seed: Seed for every random draw.
        class_separation: Distance between neighbouring class anchors.
        artifact_rate: Probability that a frame (other than the forced MES frame) is an artifact.
        videos_per_subject_max: Subjects own between 1 and this many videos.
    """

    n_videos: int = 400
    frames_min: int = 20
    frames_max: int = 60
    dim: int = 16
    class_mix: tuple[float, ...] = (167, 220, 492, 1002)
    frame_severity_decay: float = 0.5
    noise_std: float = 0.5
    seed: int = 0
    class_separation: float = 3.0
    artifact_rate: float = 0.0
    videos_per_subject_max: int = 4

    def __post_init__(self):
        object.__setattr__(self, "class_mix", tuple(float(w) for w in self.class_mix))
        problems = []
        if self.n_videos < 1:
            problems.append("n_videos must be at least 1")
        if self.frames_min < 1:
            problems.append("frames_min must be at least 1")
        if self.frames_max < self.frames_min:
            problems.append("frames_max must not be below frames_min")
        if self.dim < 2:
            problems.append("dim must be at least 2")
        if len(self.class_mix) != N_CLASSES:
            problems.append(f"class_mix must have {N_CLASSES} weights")
        elif any(w < 0 for w in self.class_mix) or sum(self.class_mix) <= 0:
            problems.append("class_mix weights must be nonnegative with a positive sum")
        if not 0 < self.frame_severity_decay <= 1:
            problems.append("frame_severity_decay must be in (0, 1]")
        if self.noise_std < 0:
            problems.append("noise_std must be nonnegative")
        if self.class_separation <= 0:
            problems.append("class_separation must be positive")
        if not 0 <= self.artifact_rate < 1:
            problems.append("artifact_rate must be in [0, 1)")
        if self.videos_per_subject_max < 1:
            problems.append("videos_per_subject_max must be at least 1")

        if problems:
            msg = "Invalid synthetic spec: " + "; ".join(problems)
            raise DatasetError(msg)


@dataclass(frozen=True)
class FeatureAnchors:
    """Cluster centers used to draw frame features."""

    classes: np.ndarray[Any, np.dtype[np.float64]]  # (4, d)
    artifact: np.ndarray[Any, np.dtype[np.float64]]  # (d,)

    @classmethod
    def from_spec(cls, spec: SyntheticSpec) -> FeatureAnchors:
        """Build the anchors for a spec from their own seeded stream."""
        rng = np.random.default_rng([spec.seed, 0xA7C])
        u = rng.standard_normal(spec.dim)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(spec.dim)
        v -= (v @ u) * u
        v /= np.linalg.norm(v)

        sep = spec.class_separation
        classes = np.outer(np.arange(N_CLASSES, dtype=np.float64) * sep, u)
        artifact = ARTIFACT_SEVERITY_OFFSET * sep * u + ARTIFACT_ORTHOGONAL_OFFSET * sep * v
        return cls(classes=classes, artifact=artifact)


def apportion(weights: tuple[float, ...], total: int) -> list[int]:
    """Split `total` into integer counts proportional to `weights` by largest remainder."""
    shares = np.asarray(weights, dtype=np.float64) / sum(weights) * total
    counts = np.floor(shares).astype(int)
    remainder = total - int(counts.sum())
    # Stable sort keeps lower classes first among equal remainders
    order = np.argsort(-(shares - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts.tolist()


def planted_label_weights(mes: int, decay: float) -> np.ndarray[Any, np.dtype[np.float64]]:
    """Sampling distribution of a frame label within a video of the given MES."""
    weights = decay ** np.arange(mes + 1, dtype=np.float64)
    return weights / weights.sum()


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Generate a deterministic synthetic dataset from a spec.

    Raises:
        DatasetError: If the spec is invalid.
    """
    rng = np.random.default_rng(spec.seed)
    anchors = FeatureAnchors.from_spec(spec)

    counts = apportion(spec.class_mix, spec.n_videos)
    video_labels = rng.permutation(np.repeat(np.arange(N_CLASSES), counts))

    bags = []
    subject_index = -1
    subject_left = 0
    for index, mes in enumerate(video_labels.tolist()):
        if subject_left == 0:
            subject_index += 1
            subject_left = int(rng.integers(1, spec.videos_per_subject_max + 1))
        subject_left -= 1

        n_frames = int(rng.integers(spec.frames_min, spec.frames_max + 1))
        labels = rng.choice(mes + 1, size=n_frames, p=planted_label_weights(mes, spec.frame_severity_decay))
        forced = int(rng.integers(n_frames))
        labels[forced] = mes

        centers = anchors.classes[labels]
        artifacts = None
        if spec.artifact_rate > 0:
            flags = rng.random(n_frames) < spec.artifact_rate
            flags[forced] = False
            labels[flags] = 0
            centers = np.where(flags[:, None], anchors.artifact, anchors.classes[labels])
            artifacts = tuple(flags.tolist())

        frames = centers + spec.noise_std * rng.standard_normal((n_frames, spec.dim))
        bags.append(
            VideoBag(
                video_id=f"v{index:05d}",
                subject_id=f"s{subject_index:04d}",
                mes=mes,
                frames=frames,
                planted_frame_labels=tuple(labels.tolist()),
                artifact_frames=artifacts,
            )
        )

    return Dataset(spec.dim, tuple(bags))
