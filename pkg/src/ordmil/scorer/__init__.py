from __future__ import annotations

from .gradcheck import FD_STEP, check_gradients, gradient_check
from .losses import SCORE_MAX, SCORE_MIN, LossKind, ScorerError, clip_score, loss_and_grad, loss_regime
from .model import (
    DEFAULT_HIDDEN_DIMS,
    SIGMOID_FLOOR,
    Gradients,
    Head,
    ScorerModel,
    activation_pattern,
    backward,
    backward_batch,
    backward_from_cache,
    forward,
    forward_batch,
    forward_cache,
)
from .optim import AdamState, adam_step
from .storage import load_model, save_model
