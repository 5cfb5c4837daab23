"""Small feedforward frame scorer with analytic backpropagation.

The scorer maps a frame feature vector to one score through ReLU hidden layers and a single
output unit. A sigmoid head gives a probability strictly inside (0, 1), even for saturated
logits, for the ranked binary tasks; a linear head gives an unbounded severity score for
regression, which is clipped to [0, 3] only when predicting.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.special import expit

from ordmil.scorer.losses import ScorerError

if TYPE_CHECKING:
    from collections.abc import Sequence

type Array = np.ndarray[Any, np.dtype[np.float64]]

DEFAULT_HIDDEN_DIMS = (64, 32)

# Sigmoid outputs stay in [SIGMOID_FLOOR, 1 - SIGMOID_FLOOR]; 1 - 2**-53 is the largest double below 1
SIGMOID_FLOOR = 2.0**-53


class Head(StrEnum):
    """Output head of a scorer."""

    SIGMOID = "sigmoid"
    LINEAR = "linear"


@dataclass
class Gradients:
    """Parameter gradients with the same layout as a ScorerModel."""

    weights: list[Array]
    biases: list[Array]

    def arrays(self) -> list[Array]:
        """All arrays in parameter order (W0, b0, W1, b1, ...)."""
        return [a for pair in zip(self.weights, self.biases, strict=True) for a in pair]

    def scaled(self, factor: float) -> Gradients:
        """Return a copy multiplied by a constant."""
        return Gradients([w * factor for w in self.weights], [b * factor for b in self.biases])

    def flat(self) -> Array:
        """Concatenate all gradients into one vector."""
        return np.concatenate([a.ravel() for a in self.arrays()])


@dataclass(eq=False)
class ScorerModel:
    """Fully connected scorer with one output unit.

    Attributes:
        layer_dims: Input dimension, hidden sizes, then 1.
        weights: Per-layer weight matrices of shape (fan_in, fan_out).
        biases: Per-layer bias vectors of shape (fan_out,).
        head: Output head, sigmoid or linear.
    """

    layer_dims: tuple[int, ...]
    weights: list[Array]
    biases: list[Array]
    head: Head

    def __post_init__(self):
        self.layer_dims = tuple(int(n) for n in self.layer_dims)
        self.head = Head(self.head)
        if len(self.layer_dims) < 2 or self.layer_dims[-1] != 1:
            msg = f"Layer dims must end in a single output unit, got {self.layer_dims}"
            raise ScorerError(msg)
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            msg = "Expected one weight matrix and bias vector per layer"
            raise ScorerError(msg)

        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.array(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                msg = f"Layer {i} has shapes {w.shape}/{b.shape}, expected {expected}/({expected[1]},)"
                raise ScorerError(msg)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                msg = f"Layer {i} has non-finite parameters"
                raise ScorerError(msg)

    @classmethod
    def init(cls, layer_dims: Sequence[int], head: Head | str, seed: int) -> ScorerModel:
        """Create a model with seeded uniform fan-in weights and zero biases."""
        dims = tuple(int(n) for n in layer_dims)
        rng = np.random.default_rng(seed)
        weights = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases = [np.zeros(n) for n in dims[1:]]
        return cls(dims, weights, biases, Head(head))

    @classmethod
    def zeros(cls, layer_dims: Sequence[int], head: Head | str) -> ScorerModel:
        """Create an all-zero model."""
        dims = tuple(int(n) for n in layer_dims)
        weights = [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:], strict=True)]
        return cls(dims, weights, [np.zeros(n) for n in dims[1:]], Head(head))

    @property
    def input_dim(self) -> int:
        """Expected frame dimension d."""
        return self.layer_dims[0]

    @property
    def n_parameters(self) -> int:
        """Total number of scalar parameters."""
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases, strict=True))

    def parameters(self) -> list[Array]:
        """All parameter arrays in order (W0, b0, W1, b1, ...). These are the live arrays."""
        return [a for pair in zip(self.weights, self.biases, strict=True) for a in pair]

    def copy(self) -> ScorerModel:
        """Deep copy of the model."""
        return ScorerModel(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScorerModel):
            return NotImplemented
        return (
            self.layer_dims == other.layer_dims
            and self.head == other.head
            and all(np.array_equal(a, b) for a, b in zip(self.parameters(), other.parameters(), strict=True))
        )


@dataclass
class ForwardCache:
    """Intermediate values of a batched forward pass."""

    inputs: list[Array]  # input of every layer
    pre_activations: list[Array]  # pre-activation of every layer
    scores: Array


def _as_batch(model: ScorerModel, frames: Any) -> Array:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        msg = f"Frames of shape {np.shape(frames)} do not match model input dimension {model.input_dim}"
        raise ScorerError(msg)
    return x


def forward_cache(model: ScorerModel, frames: Any) -> ForwardCache:
    """Run a batched forward pass and keep what backpropagation needs.

    Raises:
        ScorerError: If the frame dimension does not match the model input.
    """
    h = _as_batch(model, frames)
    inputs, pre = [], []
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases, strict=True)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z

    out = h[:, 0]
    if model.head is Head.SIGMOID:
        scores = np.clip(expit(out), SIGMOID_FLOOR, 1.0 - SIGMOID_FLOOR)
    else:
        scores = out
    return ForwardCache(inputs, pre, scores)


def forward_batch(model: ScorerModel, frames: Any) -> Array:
    """Score every row of an (n, d) frame matrix."""
    return forward_cache(model, frames).scores


def forward(model: ScorerModel, frame: Any) -> float:
    """Score a single frame."""
    return float(forward_batch(model, frame)[0])


def backward_from_cache(model: ScorerModel, cache: ForwardCache, upstream: Any) -> Gradients:
    """Backpropagate per-frame loss derivatives, summing parameter gradients over the batch.

    Raises:
        ScorerError: If `upstream` does not have one entry per frame.
    """
    g = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if g.shape[0] != cache.scores.shape[0]:
        msg = f"Got {g.shape[0]} upstream gradients for {cache.scores.shape[0]} frames"
        raise ScorerError(msg)

    if model.head is Head.SIGMOID:
        s = cache.scores
        # clamped outputs are flat in the logit
        inside = (s > SIGMOID_FLOOR) & (s < 1.0 - SIGMOID_FLOOR)
        g = np.where(inside, g * s * (1.0 - s), 0.0)
    delta = g[:, None]

    n_layers = len(model.weights)
    grad_w: list[Array] = [np.empty(0)] * n_layers
    grad_b: list[Array] = [np.empty(0)] * n_layers
    for i in reversed(range(n_layers)):
        grad_w[i] = cache.inputs[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (cache.pre_activations[i - 1] > 0)

    return Gradients(grad_w, grad_b)


def backward_batch(model: ScorerModel, frames: Any, upstream: Any) -> Gradients:
    """Parameter gradients of sum_i upstream[i] * score(frames[i])."""
    return backward_from_cache(model, forward_cache(model, frames), upstream)


def backward(model: ScorerModel, frame: Any, dloss_dscore: float) -> Gradients:
    """Parameter gradients of a loss through one frame's score."""
    return backward_batch(model, frame, [dloss_dscore])


def activation_pattern(model: ScorerModel, frames: Any) -> tuple[bytes, ...]:
    """Which hidden units are active for each frame, as hashable bytes per layer."""
    cache = forward_cache(model, frames)
    return tuple((z > 0).tobytes() for z in cache.pre_activations[:-1])
