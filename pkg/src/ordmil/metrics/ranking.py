from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import rankdata

from ordmil.metrics.agreement import MetricError

if TYPE_CHECKING:
    from collections.abc import Sequence


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """ROC AUC as the Mann-Whitney probability that a positive outranks a negative.

    Tied pairs count one half, through average ranks.

    Raises:
        MetricError: If only one class is present or the inputs do not line up.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        msg = f"Scores and labels must be equally long 1-D sequences, got {s.shape} and {y.shape}"
        raise MetricError(msg)
    if not np.all(np.isin(y, (0, 1))):
        msg = "AUC labels must be 0 or 1"
        raise MetricError(msg)

    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        msg = "AUC is undefined when only one class is present"
        raise MetricError(msg)

    ranks = rankdata(s)
    u_statistic = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u_statistic / (n_pos * n_neg))
