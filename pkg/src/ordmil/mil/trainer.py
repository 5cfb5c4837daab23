"""Multi-instance training of frame scorers from bag labels.

Every step scores all frames of one bag with the current model, picks the representative frames
(argmax for positive bags, top-K for class-0 bags) and takes one Adam step on the loss of those
frames only. The representatives are recomputed every time a bag is visited, so selection follows
the model as it learns.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from polykit import PolyLog
from tqdm import tqdm

from ordmil.dataset import MAX_MES
from ordmil.mil.config import TrainConfig, TrainingError
from ordmil.mil.selection import Representatives, select_representatives
from ordmil.scorer import (
    AdamState,
    Gradients,
    Head,
    LossKind,
    ScorerModel,
    activation_pattern,
    adam_step,
    backward_from_cache,
    check_gradients,
    forward_cache,
    loss_and_grad,
    loss_regime,
)

if TYPE_CHECKING:
    from collections.abc import Hashable, Iterable, Sequence

    from ordmil.dataset import VideoBag

logger = PolyLog.get_logger("ordmil.mil")

# Sigmoid outputs are kept this far from 0 and 1 before entering the BCE loss
BCE_EPSILON = 1e-7


@dataclass(frozen=True)
class EpochRecord:
    """Loss summary of one epoch. Epoch 0 is the untrained model."""

    epoch: int
    mean_loss: float
    n_samples: int
    wall_time: float


@dataclass(eq=False)
class TrainResult:
    """A trained scorer and its per-epoch loss trace."""

    model: ScorerModel
    trace: list[EpochRecord] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        """Mean loss before the first update."""
        return self.trace[0].mean_loss

    @property
    def final_loss(self) -> float:
        """Mean loss of the last epoch."""
        return self.trace[-1].mean_loss


def bag_loss_and_grad(
    model: ScorerModel,
    frames: Any,
    label: int,
    k: int,
    kind: LossKind,
    regression: bool = False,
) -> tuple[float, Gradients, Representatives]:
    """Loss of one bag and its gradient, flowing only through the selected frames.

    For ranked binary training `label` is the binary bag label. For regression it is the MES, and
    positive bags regress their argmax frame toward the MES itself. Losses of several
    representatives are averaged, so K changes sampling rather than the step size.
    """
    cache = forward_cache(model, frames)
    reps = select_representatives(cache.scores, int(label > 0), k)
    indices = np.asarray(reps.indices)
    if regression and label > 0:
        targets = np.full(len(reps), float(label))
    else:
        targets = np.asarray(reps.targets)

    preds = cache.scores[indices]
    if kind is LossKind.BCE:
        preds = np.clip(preds, BCE_EPSILON, 1.0 - BCE_EPSILON)
    losses, dloss = loss_and_grad(kind, preds, targets)

    upstream = np.zeros_like(cache.scores)
    upstream[indices] = dloss / len(reps)
    return float(np.mean(losses)), backward_from_cache(model, cache, upstream), reps


def bag_gradient_check(
    model: ScorerModel,
    frames: Any,
    label: int,
    k: int,
    kind: LossKind,
    regression: bool = False,
) -> float:
    """Check the bag objective's gradient against central differences.

    Parameters whose nudges change the selected frames, an active hidden unit, or the side of a
    loss kink are skipped.
    """
    frames = np.asarray(frames, dtype=np.float64)

    def objective(m: ScorerModel) -> tuple[float, Hashable]:
        loss, _, reps = bag_loss_and_grad(m, frames, label, k, kind, regression)
        selected = frames[list(reps.indices)]
        scores = forward_cache(m, selected).scores
        target = float(label) if regression and label > 0 else reps.targets[0]
        regimes = tuple(loss_regime(kind, float(s), target) for s in scores)
        clipped = tuple(bool(s <= BCE_EPSILON or s >= 1 - BCE_EPSILON) for s in scores)
        return loss, (reps.indices, activation_pattern(m, selected), regimes, clipped)

    _, grads, _ = bag_loss_and_grad(model, frames, label, k, kind, regression)
    return check_gradients(model, objective, grads)


def train_binary_mil(
    labeled_bags: Sequence[tuple[VideoBag, int]],
    config: TrainConfig,
    progress: bool = False,
) -> TrainResult:
    """Train a sigmoid-head scorer with binary MIL and BCE loss.

    Raises:
        TrainingError: If labels are not binary or the config does not use BCE.
    """
    if config.loss_kind is not LossKind.BCE:
        msg = f"Binary MIL trains with BCE, got {config.loss_kind}"
        raise TrainingError(msg)
    bad = [bag.video_id for bag, label in labeled_bags if label not in {0, 1}]
    if bad:
        msg = f"Non-binary labels for videos {bad[:5]}"
        raise TrainingError(msg)

    return _fit(list(labeled_bags), config, Head.SIGMOID, regression=False, progress=progress)


def train_regression_mil(
    bags: Iterable[VideoBag],
    config: TrainConfig,
    progress: bool = False,
) -> TrainResult:
    """Train a linear-head scorer by regressing representative frames onto the video MES.

    MES-0 bags regress their top-K frames toward 0; every other bag regresses its single
    highest-scoring frame toward its MES. Losses use the unclipped output.

    Raises:
        TrainingError: If the config asks for BCE.
    """
    if config.loss_kind is LossKind.BCE:
        msg = "Regression MIL needs a regression loss (mae, mse, smooth_l1, log_cosh), not BCE"
        raise TrainingError(msg)

    items = [(bag, bag.mes) for bag in bags]
    if any(mes not in range(MAX_MES + 1) for _, mes in items):
        msg = "Regression targets must be MES values in 0..3"
        raise TrainingError(msg)
    return _fit(items, config, Head.LINEAR, regression=True, progress=progress)


def _fit(
    items: list[tuple[VideoBag, int]],
    config: TrainConfig,
    head: Head,
    regression: bool,
    progress: bool,
) -> TrainResult:
    if not items:
        msg = "No bags to train on"
        raise TrainingError(msg)

    dim = items[0][0].dim
    model = ScorerModel.init((dim, *config.hidden_dims, 1), head, config.seed)
    state = AdamState.for_model(model, **config.adam_hyperparameters())
    rng = np.random.default_rng([config.seed, 1])
    kind, k = config.loss_kind, config.k_negative

    initial = [
        bag_loss_and_grad(model, bag.frames, label, k, kind, regression) for bag, label in items
    ]
    trace = [
        EpochRecord(
            epoch=0,
            mean_loss=float(np.mean([loss for loss, _, _ in initial])),
            n_samples=sum(len(reps) for _, _, reps in initial),
            wall_time=0.0,
        )
    ]

    start = time.perf_counter()
    epochs = tqdm(
        range(1, config.epochs + 1),
        desc=f"Training {head} scorer",
        unit="epoch",
        disable=not progress,
        leave=False,
    )
    for epoch in epochs:
        order = rng.permutation(len(items)) if config.shuffle else np.arange(len(items))
        losses = []
        n_samples = 0
        for i in order:
            bag, label = items[i]
            loss, grads, reps = bag_loss_and_grad(model, bag.frames, label, k, kind, regression)
            adam_step(model, grads, state)
            losses.append(loss)
            n_samples += len(reps)

        record = EpochRecord(epoch, float(np.mean(losses)), n_samples, time.perf_counter() - start)
        trace.append(record)
        logger.debug("Epoch %d: mean loss %.6f over %d samples", epoch, record.mean_loss, n_samples)

    logger.debug(
        "Trained %s scorer: loss %.4f -> %.4f", head, trace[0].mean_loss, trace[-1].mean_loss
    )
    return TrainResult(model, trace)


def write_trace(trace: Sequence[EpochRecord], path: Path | str, timing: bool = False) -> None:
    """Write a loss trace as a CSV table (epoch, mean_loss, n_samples, wall_time).

    Wall time is left blank unless `timing` is set, so traces of identical runs are identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss", "n_samples", "wall_time"])
        for record in trace:
            wall = repr(record.wall_time) if timing else ""
            writer.writerow([record.epoch, repr(record.mean_loss), record.n_samples, wall])
