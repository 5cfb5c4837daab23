"""Linear max-margin classifier that flags artifact frames.

Training minimizes the regularized hinge objective

    lam / 2 * ||(w, b)||^2 + mean_i max(0, 1 - y_i * (w . x_i + b))

with seeded single-sample stochastic subgradient steps of size 1 / (lam * t). The bias is folded
into the weight vector as a constant feature, so it is regularized like any other weight. After
each step the iterate is projected onto the ball of radius 1 / sqrt(lam), and the returned model is
the end-of-epoch iterate with the lowest objective, the all-zero start included.

Label +1 means artifact (remove), -1 means clean.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from polykit import PolyLog

from ordmil.errors import OrdmilError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ordmil.dataset import Dataset

logger = PolyLog.get_logger("ordmil.qcfilter")

SVM_FORMAT = "ordmil-svm"
SVM_VERSION = 1


class QualityControlError(OrdmilError):
    """Raised for invalid SVM inputs."""


@dataclass(frozen=True)
class SvmConfig:
    """Solver settings for `train_svm`."""

    lam: float = 1e-3
    epochs: int = 20
    seed: int = 0
    projection: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            msg = f"SVM regularization must be positive, got {self.lam}"
            raise QualityControlError(msg)
        if self.epochs < 1:
            msg = f"SVM epochs must be at least 1, got {self.epochs}"
            raise QualityControlError(msg)


@dataclass(frozen=True, eq=False)
class LinearSvm:
    """Trained linear classifier with the settings that produced it."""

    w: np.ndarray
    b: float
    lam: float
    epochs: int
    seed: int
    objective: float = math.nan

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not math.isfinite(self.b):
            msg = "SVM weights must be a finite vector and the bias finite"
            raise QualityControlError(msg)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        """Feature dimension."""
        return self.w.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearSvm):
            return NotImplemented
        return np.array_equal(self.w, other.w) and self.b == other.b


def _check_features(model_dim: int | None, frames: Any) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or (model_dim is not None and x.shape[1] != model_dim):
        msg = f"Frames of shape {np.shape(frames)} do not match SVM dimension {model_dim}"
        raise QualityControlError(msg)
    return x


def hinge_objective(v: np.ndarray, x_aug: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Regularized hinge objective of a folded weight vector (w, b)."""
    margins = y * (x_aug @ v)
    return float(lam / 2 * (v @ v) + np.mean(np.maximum(0.0, 1.0 - margins)))


def train_svm(features: Any, labels: Sequence[int], config: SvmConfig | None = None) -> LinearSvm:
    """Train a linear SVM on labeled frames.

    Raises:
        QualityControlError: If labels are not +/-1, only one class is present, or the feature
            matrix is malformed.
    """
    config = config or SvmConfig()
    x = _check_features(None, features)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (x.shape[0],):
        msg = f"Got {y.size} labels for {x.shape[0]} frames"
        raise QualityControlError(msg)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        msg = "SVM labels must be -1 or +1"
        raise QualityControlError(msg)
    if np.unique(y).size < 2:
        msg = "SVM training needs both artifact and clean frames"
        raise QualityControlError(msg)
    if not np.all(np.isfinite(x)):
        msg = "SVM features must be finite"
        raise QualityControlError(msg)

    lam = config.lam
    x_aug = np.column_stack([x, np.ones(x.shape[0])])
    rng = np.random.default_rng(config.seed)
    radius = 1.0 / math.sqrt(lam)

    v = np.zeros(x_aug.shape[1])
    best_v, best_objective = v.copy(), hinge_objective(v, x_aug, y, lam)
    t = 0
    for epoch in range(1, config.epochs + 1):
        for i in rng.permutation(x.shape[0]):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (x_aug[i] @ v)
            v *= 1.0 - eta * lam
            if margin < 1.0:
                v += eta * y[i] * x_aug[i]
            if config.projection:
                norm = math.sqrt(v @ v)
                if norm > radius:
                    v *= radius / norm

        objective = hinge_objective(v, x_aug, y, lam)
        logger.debug("SVM epoch %d: objective %.6f", epoch, objective)
        if objective < best_objective:
            best_v, best_objective = v.copy(), objective

    return LinearSvm(best_v[:-1], float(best_v[-1]), lam, config.epochs, config.seed, best_objective)


def svm_scores(model: LinearSvm, frames: Any) -> np.ndarray:
    """Decision values w . x + b for a batch of frames."""
    return _check_features(model.dim, frames) @ model.w + model.b


def svm_score(model: LinearSvm, frame: Any) -> float:
    """Decision value of one frame.

    Raises:
        QualityControlError: If the frame dimension does not match the model.
    """
    return float(svm_scores(model, frame)[0])


def svm_predict_many(model: LinearSvm, frames: Any) -> np.ndarray:
    """Labels for a batch of frames, with a zero score counted as artifact (+1)."""
    return np.where(svm_scores(model, frames) >= 0.0, 1, -1)


def svm_predict(model: LinearSvm, frame: Any) -> int:
    """Label of one frame: +1 artifact, -1 clean."""
    return int(svm_predict_many(model, frame)[0])


def svm_accuracy(model: LinearSvm, frames: Any, labels: Sequence[int]) -> float:
    """Share of frames whose predicted label matches."""
    y = np.asarray(labels)
    pred = svm_predict_many(model, frames)
    if y.shape != pred.shape or y.size == 0:
        msg = "Need one label per frame and at least one frame"
        raise QualityControlError(msg)
    return float(np.mean(pred == y))


def artifact_training_frames(dataset: Dataset, n_frames: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample a labeled frame set for SVM training from bags with artifact flags.

    Draws up to half the frames from artifacts (+1) and fills the rest with clean frames (-1),
    without replacement.

    Raises:
        QualityControlError: If the dataset has no flagged artifact frames or no clean frames.
    """
    frames, flags = [], []
    for bag in dataset:
        if bag.artifact_frames is not None:
            frames.append(bag.frames)
            flags.append(np.asarray(bag.artifact_frames, dtype=bool))
    if not frames or not np.concatenate(flags).any():
        msg = "Dataset has no flagged artifact frames to train quality control on"
        raise QualityControlError(msg)

    x = np.concatenate(frames)
    is_artifact = np.concatenate(flags)
    artifact_idx = np.flatnonzero(is_artifact)
    clean_idx = np.flatnonzero(~is_artifact)
    if clean_idx.size == 0:
        msg = "Dataset has no clean frames to train quality control on"
        raise QualityControlError(msg)

    rng = np.random.default_rng(seed)
    n_artifact = min(artifact_idx.size, max(1, n_frames // 2))
    n_clean = min(clean_idx.size, max(1, n_frames - n_artifact))
    chosen = np.concatenate(
        [
            rng.choice(artifact_idx, size=n_artifact, replace=False),
            rng.choice(clean_idx, size=n_clean, replace=False),
        ]
    )
    chosen = rng.permutation(chosen)
    return x[chosen], np.where(is_artifact[chosen], 1, -1)


def save_svm(model: LinearSvm, path: Path | str) -> None:
    """Write an SVM model file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "format": SVM_FORMAT,
        "version": SVM_VERSION,
        "w": model.w.tolist(),
        "b": model.b,
        "lam": model.lam,
        "epochs": model.epochs,
        "seed": model.seed,
        "objective": model.objective,
    }
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")


def load_svm(path: Path | str) -> LinearSvm:
    """Read an SVM model file written by `save_svm`.

    Raises:
        QualityControlError: If the file is not a valid SVM model file.
    """
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        msg = f"{path} is not valid JSON: {e.msg}"
        raise QualityControlError(msg) from e
    if record.get("format") != SVM_FORMAT or record.get("version") != SVM_VERSION:
        msg = f"{path} is not a version {SVM_VERSION} {SVM_FORMAT} file"
        raise QualityControlError(msg)
    try:
        return LinearSvm(
            w=record["w"],
            b=record["b"],
            lam=record["lam"],
            epochs=record["epochs"],
            seed=record["seed"],
            objective=record["objective"],
        )
    except (KeyError, TypeError) as e:
        msg = f"{path} has an invalid SVM record: {e}"
        raise QualityControlError(msg) from e
