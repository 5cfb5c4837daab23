from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import norm

from ordmil.metrics.agreement import MetricError

if TYPE_CHECKING:
    from collections.abc import Sequence


def fold_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """Normal-approximation interval over per-fold values: mean +/- z * sd / sqrt(n).

    Uses the sample standard deviation. At level 0.95, z is about 1.96. Identical values give
    exactly (v, v, v).

    Raises:
        MetricError: If there are fewer than 2 values or the level is not in (0, 1).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        msg = f"A fold interval needs at least 2 values, got {v.size}"
        raise MetricError(msg)
    if not 0.0 < level < 1.0:
        msg = f"Confidence level must be in (0, 1), got {level}"
        raise MetricError(msg)

    if np.all(v == v[0]):
        return float(v[0]), float(v[0]), float(v[0])

    mean = float(v.mean())
    half = float(norm.ppf(0.5 + level / 2) * v.std(ddof=1) / math.sqrt(v.size))
    return mean, mean - half, mean + half
