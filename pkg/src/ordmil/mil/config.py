from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

from ordmil.errors import OrdmilError
from ordmil.scorer import DEFAULT_HIDDEN_DIMS, LossKind


class TrainingError(OrdmilError):
    """Raised for invalid training configs or labels."""


@dataclass(frozen=True)
class TrainConfig:
    """Settings for one MIL training run.

    Attributes:
        epochs: Passes over the training bags.
        lr: Adam learning rate.
        weight_decay: Coupled L2 weight decay.
        loss_kind: Training loss. BCE for ranked binary members, any other for regression.
        k_negative: How many top-scoring frames represent a class-0 bag.
        seed: Seed for initialization and shuffling.
        shuffle: Whether to reshuffle the bag order every epoch.
        hidden_dims: Hidden layer sizes of the scorer.
        beta1: Adam first-moment decay.
        beta2: Adam second-moment decay.
        epsilon: Adam denominator guard.
    """

    epochs: int = 100
    lr: float = 1e-5
    weight_decay: float = 0.01
    loss_kind: LossKind = LossKind.BCE
    k_negative: int = 1
    seed: int = 0
    shuffle: bool = True
    hidden_dims: tuple[int, ...] = field(default=DEFAULT_HIDDEN_DIMS)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
        object.__setattr__(self, "hidden_dims", tuple(int(n) for n in self.hidden_dims))
        if self.epochs < 1:
            msg = f"epochs must be at least 1, got {self.epochs}"
            raise TrainingError(msg)
        if self.k_negative < 1:
            msg = f"k_negative must be at least 1, got {self.k_negative}"
            raise TrainingError(msg)
        if self.lr <= 0 or self.weight_decay < 0:
            msg = "lr must be positive and weight_decay nonnegative"
            raise TrainingError(msg)
        if any(n < 1 for n in self.hidden_dims):
            msg = f"hidden layer sizes must be positive, got {self.hidden_dims}"
            raise TrainingError(msg)

    def with_overrides(self, **changes: Any) -> TrainConfig:
        """Copy with some fields replaced."""
        values = asdict(self)
        values.update(changes)
        return TrainConfig(**values)

    def adam_hyperparameters(self) -> dict[str, float]:
        """Keyword arguments for AdamState."""
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "weight_decay": self.weight_decay,
        }
