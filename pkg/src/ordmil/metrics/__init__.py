from __future__ import annotations

from .agreement import (
    ConfusionMatrix,
    MetricError,
    RatingTable,
    cohen_kappa_quadratic,
    fleiss_kappa,
    kappa_from_stats,
    kappa_statistics,
    per_rater_kappa,
    quadratic_kappa,
    quadratic_weights,
    simulate_raters,
)
from .consensus import adjust_frame_label, consensus_labels, exceeding_fraction, majority_consensus
from .intervals import fold_ci
from .ranking import roc_auc
from .report import FoldSummary, MetricsReport, load_report, save_report, validate_report
