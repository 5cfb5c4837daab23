from __future__ import annotations

from .config import TrainConfig, TrainingError
from .predict import BinaryPrediction, predict_video_binary, video_scores_binary
from .selection import Representatives, argmax_frame, score_bag, select_representatives, top_k_frames
from .trainer import (
    BCE_EPSILON,
    EpochRecord,
    TrainResult,
    bag_gradient_check,
    bag_loss_and_grad,
    train_binary_mil,
    train_regression_mil,
    write_trace,
)
