"""Loss functions with exact analytic derivatives."""

from __future__ import annotations

import math
from enum import StrEnum
from typing import Any, overload

import numpy as np

from ordmil.errors import OrdmilError

type FloatArray = np.ndarray[Any, np.dtype[np.float64]]

# Range restriction applied to regression outputs at inference time
SCORE_MIN = 0.0
SCORE_MAX = 3.0

# Regime boundary of the smooth L1 loss
SMOOTH_L1_BETA = 1.0


class ScorerError(OrdmilError):
    """Raised for invalid scorer inputs: shapes, heads, losses or model files."""


class LossKind(StrEnum):
    """Supported training losses."""

    BCE = "bce"
    MAE = "mae"
    MSE = "mse"
    SMOOTH_L1 = "smooth_l1"
    LOG_COSH = "log_cosh"

    @property
    def is_regression(self) -> bool:
        """Whether this loss belongs with a linear head."""
        return self is not LossKind.BCE


@overload
def loss_and_grad(kind: LossKind, pred: float, target: float) -> tuple[float, float]: ...


@overload
def loss_and_grad(
    kind: LossKind, pred: FloatArray, target: FloatArray | float
) -> tuple[FloatArray, FloatArray]: ...


def loss_and_grad(kind: LossKind, pred: Any, target: Any) -> tuple[Any, Any]:
    """Evaluate a loss and its derivative with respect to the prediction.

    Works elementwise on arrays; scalar inputs give scalar outputs.

    Raises:
        ScorerError: If BCE gets a prediction outside (0, 1) or a non-binary target.
    """
    scalar = np.ndim(pred) == 0 and np.ndim(target) == 0
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)

    match kind:
        case LossKind.BCE:
            if np.any((p <= 0) | (p >= 1)):
                msg = "BCE needs predictions strictly inside (0, 1)"
                raise ScorerError(msg)
            if np.any((t != 0) & (t != 1)):
                msg = "BCE needs binary targets"
                raise ScorerError(msg)
            loss = -(t * np.log(p) + (1 - t) * np.log1p(-p))
            grad = (p - t) / (p * (1 - p))
        case LossKind.MAE:
            diff = p - t
            loss = np.abs(diff)
            grad = np.sign(diff)
        case LossKind.MSE:
            diff = p - t
            loss = diff**2
            grad = 2 * diff
        case LossKind.SMOOTH_L1:
            diff = p - t
            quadratic = np.abs(diff) < SMOOTH_L1_BETA
            loss = np.where(quadratic, 0.5 * diff**2 / SMOOTH_L1_BETA, np.abs(diff) - 0.5 * SMOOTH_L1_BETA)
            grad = np.where(quadratic, diff / SMOOTH_L1_BETA, np.sign(diff))
        case LossKind.LOG_COSH:
            diff = p - t
            a = np.abs(diff)
            # log(cosh(x)) = |x| + log1p(exp(-2|x|)) - log(2), stable for large |x|
            loss = a + np.log1p(np.exp(-2 * a)) - math.log(2)
            grad = np.tanh(diff)

    if scalar:
        return float(loss), float(grad)
    return loss, grad


def loss_regime(kind: LossKind, pred: float, target: float) -> int:
    """Identify which smooth piece of the loss a prediction falls on.

    Central differences are only meaningful when both nudged evaluations stay on the same piece.
    """
    diff = pred - target
    match kind:
        case LossKind.MAE:
            return int(np.sign(diff))
        case LossKind.SMOOTH_L1:
            return 0 if abs(diff) < SMOOTH_L1_BETA else int(np.sign(diff)) * 2
        case _:
            return 0


def clip_score(s: float) -> float:
    """Restrict a regression score to [0, 3].

    Raises:
        ScorerError: If the score is not finite.
    """
    if not math.isfinite(s):
        msg = f"Cannot clip non-finite score {s}"
        raise ScorerError(msg)
    return min(SCORE_MAX, max(SCORE_MIN, float(s)))
