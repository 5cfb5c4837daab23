from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ordmil.dataset import MAX_MES
from ordmil.errors import OrdmilError


class ThresholdError(OrdmilError):
    """Raised for invalid threshold sets, grid steps, or empty evaluation sets."""


@dataclass(frozen=True)
class BinaryThresholds:
    """One probability threshold per ranked binary member, each in [0, 1]. Unordered."""

    t1: float
    t2: float
    t3: float

    def __post_init__(self):
        for name, value in zip(("t1", "t2", "t3"), self.as_tuple(), strict=True):
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                msg = f"Binary threshold {name} must be in [0, 1], got {value}"
                raise ThresholdError(msg)

    def as_tuple(self) -> tuple[float, float, float]:
        """Thresholds in member order (φ>0, φ>1, φ>2)."""
        return (self.t1, self.t2, self.t3)


@dataclass(frozen=True)
class OrdinalThresholds:
    """Cut points binning a continuous score in [0, 3] into four classes.

    Must satisfy 0 < t0 < t1 < t2 < 3.
    """

    t0: float
    t1: float
    t2: float

    def __post_init__(self):
        if not all(math.isfinite(t) for t in self.as_tuple()):
            msg = f"Ordinal thresholds must be finite, got {self.as_tuple()}"
            raise ThresholdError(msg)
        if not 0.0 < self.t0 < self.t1 < self.t2 < MAX_MES:
            msg = f"Ordinal thresholds must satisfy 0 < t0 < t1 < t2 < 3, got {self.as_tuple()}"
            raise ThresholdError(msg)

    def as_tuple(self) -> tuple[float, float, float]:
        """Cut points in increasing order."""
        return (self.t0, self.t1, self.t2)


def threshold_grid(step: float, upper: float = 1.0) -> np.ndarray:
    """Grid points 0, step, 2*step, ..., upper, rounded to 12 decimals.

    Raises:
        ThresholdError: If the step does not divide [0, upper] evenly.
    """
    if not (math.isfinite(step) and 0.0 < step <= upper):
        msg = f"Grid step must be in (0, {upper}], got {step}"
        raise ThresholdError(msg)

    n = round(upper / step)
    if abs(n * step - upper) > 1e-9:
        msg = f"Grid step {step} does not divide [0, {upper}] evenly"
        raise ThresholdError(msg)
    return np.round(np.arange(n + 1) * step, 12)
