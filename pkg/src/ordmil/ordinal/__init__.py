from __future__ import annotations

from .aggregate import (
    FrameTriple,
    aggregate_convert,
    aggregate_sum,
    aggregate_threshold,
    bin_ordinal,
    bin_ordinal_many,
    classes_convert,
    classes_threshold,
    convert_probabilities,
    scores_sum,
    video_class,
)
from .ensemble import (
    FRAME_SCORE_COLUMNS,
    MEMBER_NAMES,
    REGRESSION_COLUMNS,
    EnsembleModel,
    EnsemblePrediction,
    frame_score_rows,
    load_ensemble,
    predict_video_ensemble,
    predict_video_regression,
    save_ensemble,
    train_ensemble,
    video_scores_regression,
    write_frame_scores,
)
from .thresholds import BinaryThresholds, OrdinalThresholds, ThresholdError, threshold_grid
from .tuning import (
    DEFAULT_GRID_STEP,
    GridSearchResult,
    evaluate_binary_thresholds,
    evaluate_ordinal_thresholds,
    grid_search_binary_thresholds,
    grid_search_ordinal_thresholds,
    video_scores_sum,
)
