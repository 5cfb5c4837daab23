from __future__ import annotations

from .filter import FilterStats, filter_dataset
from .svm import (
    LinearSvm,
    QualityControlError,
    SvmConfig,
    artifact_training_frames,
    hinge_objective,
    load_svm,
    save_svm,
    svm_accuracy,
    svm_predict,
    svm_predict_many,
    svm_score,
    svm_scores,
    train_svm,
)
