"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.scorer.losses import ScorerError, loss_and_grad, loss_regime
from ordmil.scorer.model import activation_pattern, backward, forward

if TYPE_CHECKING:
    from collections.abc import Callable, Hashable

    from ordmil.scorer.losses import LossKind
    from ordmil.scorer.model import Gradients, ScorerModel

FD_STEP = 1e-5
MAX_CHECK_PARAMETERS = 10_000

# Relative error denominator floor, so near-zero gradients are compared absolutely
RELATIVE_FLOOR = 1e-6

type Objective = Callable[[ScorerModel], tuple[float, Hashable]]


def check_gradients(
    model: ScorerModel,
    objective: Objective,
    analytic: Gradients,
    step: float = FD_STEP,
) -> float:
    """Compare analytic gradients with central differences on every parameter.

    The objective returns the loss and a regime key. A parameter is skipped when either nudged copy
    lands in a different regime than the unperturbed model (a kink between the two nudges), since
    the derivative is not defined there.

    Returns:
        The worst relative error over the checked parameters (0.0 if all were skipped).

    Raises:
        ScorerError: If the model has too many parameters for finite differences.
    """
    if model.n_parameters >= MAX_CHECK_PARAMETERS:
        msg = f"Model has {model.n_parameters} parameters; gradient checks need fewer than {MAX_CHECK_PARAMETERS}"
        raise ScorerError(msg)

    nudged = model.copy()
    _, base_regime = objective(nudged)
    worst = 0.0

    for param, grad in zip(nudged.parameters(), analytic.arrays(), strict=True):
        flat = param.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus, plus_regime = objective(nudged)
            flat[i] = original - step
            minus, minus_regime = objective(nudged)
            flat[i] = original

            if plus_regime != base_regime or minus_regime != base_regime:
                continue

            numeric = (plus - minus) / (2 * step)
            exact = float(grad_flat[i])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), RELATIVE_FLOOR)
            worst = max(worst, error)

    return worst


def gradient_check(model: ScorerModel, frame: Any, kind: LossKind, target: float) -> float:
    """Check backward() for the loss of one frame's score against central differences."""
    frame = np.asarray(frame, dtype=np.float64)

    def objective(m: ScorerModel) -> tuple[float, Hashable]:
        pred = forward(m, frame)
        loss, _ = loss_and_grad(kind, pred, target)
        return loss, (activation_pattern(m, frame), loss_regime(kind, pred, target))

    pred = forward(model, frame)
    _, dloss = loss_and_grad(kind, pred, target)
    return check_gradients(model, objective, backward(model, frame, dloss))
