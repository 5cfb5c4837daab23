from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.scorer.losses import ScorerError

if TYPE_CHECKING:
    from ordmil.scorer.model import Gradients, ScorerModel

type Array = np.ndarray[Any, np.dtype[np.float64]]


@dataclass
class AdamState:
    """Adam moment accumulators and hyperparameters for one model.

    Weight decay is coupled: `weight_decay * param` is added to the gradient before the moments
    are updated.
    """

    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    first_moments: list[Array] = field(default_factory=list)
    second_moments: list[Array] = field(default_factory=list)

    @classmethod
    def for_model(cls, model: ScorerModel, **hyperparameters: float) -> AdamState:
        """Create zeroed moments shaped like the model's parameters."""
        state = cls(**hyperparameters)  # type: ignore[arg-type]
        state.first_moments = [np.zeros_like(p) for p in model.parameters()]
        state.second_moments = [np.zeros_like(p) for p in model.parameters()]
        return state


def adam_step(
    model: ScorerModel, gradients: Gradients, state: AdamState
) -> tuple[ScorerModel, AdamState]:
    """Apply one bias-corrected Adam update in place and return the model and state.

    Raises:
        ScorerError: If gradient or moment shapes do not match the model.
    """
    params = model.parameters()
    grads = gradients.arrays()
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p) for p in params]
        state.second_moments = [np.zeros_like(p) for p in params]

    shapes = [p.shape for p in params]
    for name, arrays in (
        ("gradient", grads),
        ("first moment", state.first_moments),
        ("second moment", state.second_moments),
    ):
        if [a.shape for a in arrays] != shapes:
            msg = f"{name.capitalize()} shapes do not match the model parameters"
            raise ScorerError(msg)

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step

    for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments, strict=True):
        g = g + state.weight_decay * p if state.weight_decay else g
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)

    return model, state
