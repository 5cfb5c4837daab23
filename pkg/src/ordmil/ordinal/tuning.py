"""Exhaustive threshold grid searches maximizing video-level quadratic weighted kappa.

Both searches work on cached scores and never rescore frames. Kappa is computed from integer
statistics, so equal confusion tables give identical kappas and the tie-break is exact: the first
maximizer in index order, which is the lexicographically smallest threshold triple.

Binary thresholds: a frame's prediction for member m at grid index j is 1 iff j <= r, where r is
the index of the largest grid point not above the probability. A video reaches class >= c at a
grid point iff some frame has at least c members switched on there, which is an upper set in
(j1, j2, j3). Marking each frame's rank corner and OR-accumulating toward the origin gives all
three upper sets per video in a few array passes, so every grid point is evaluated exactly.

Ordinal thresholds: binning is monotone, so a video's class is the bin of its maximum frame
score. Only the rank of each video score on the grid matters, and prefix sums over ranks give the
confusion counts of every ordered triple.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
from polykit import PolyLog

from ordmil.dataset import MAX_MES, N_CLASSES
from ordmil.metrics import ConfusionMatrix, cohen_kappa_quadratic, quadratic_weights
from ordmil.ordinal.aggregate import bin_ordinal_many, classes_threshold, scores_sum
from ordmil.ordinal.thresholds import BinaryThresholds, OrdinalThresholds, ThresholdError, threshold_grid

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = PolyLog.get_logger("ordmil.ordinal")

DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True)
class GridSearchResult:
    """Best thresholds found by a grid search and the kappa they achieve."""

    thresholds: BinaryThresholds | OrdinalThresholds
    kappa: float


def _check_labels(labels: Sequence[int], n_videos: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if n_videos == 0 or y.size == 0:
        msg = "Cannot tune thresholds on an empty evaluation set"
        raise ThresholdError(msg)
    if y.shape != (n_videos,):
        msg = f"Got {y.size} labels for {n_videos} videos"
        raise ThresholdError(msg)
    if y.min() < 0 or y.max() > MAX_MES:
        msg = "Video labels must lie in 0..3"
        raise ThresholdError(msg)
    return y


def _kappa_grid(observed: np.ndarray, n: int, expected: np.ndarray) -> np.ndarray:
    """Vectorized `kappa_from_stats` over integer statistic arrays."""
    num = (observed * n).astype(np.float64)
    den = expected.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = 1.0 - num / den
    return np.where(expected == 0, 1.0, kappa)


def _rank_on_grid(grid: np.ndarray, values: Any) -> np.ndarray:
    """Index of the largest grid point <= each value."""
    return np.searchsorted(grid, values, side="right") - 1


def _suffix_any(marks: np.ndarray) -> np.ndarray:
    """OR-accumulate a boolean array from the far end of every axis toward the origin."""
    out = marks
    for axis in range(marks.ndim):
        flipped = np.flip(out, axis=axis)
        out = np.flip(np.logical_or.accumulate(flipped, axis=axis), axis=axis)
    return out


def _video_classes_on_grid(ranks: np.ndarray, size: int) -> np.ndarray:
    """Video class at every binary grid point, from the (F, 3) grid ranks of its frames."""
    r0, r1, r2 = ranks[:, 0], ranks[:, 1], ranks[:, 2]
    j = np.arange(size)

    at_least_one = (
        (j <= r0.max())[:, None, None] | (j <= r1.max())[None, :, None] | (j <= r2.max())[None, None, :]
    )

    def pair(ra: np.ndarray, rb: np.ndarray) -> np.ndarray:
        marks = np.zeros((size, size), dtype=bool)
        marks[ra, rb] = True
        return _suffix_any(marks)

    at_least_two = (
        pair(r0, r1)[:, :, None] | pair(r0, r2)[:, None, :] | pair(r1, r2)[None, :, :]
    )

    marks = np.zeros((size, size, size), dtype=bool)
    marks[r0, r1, r2] = True
    all_three = _suffix_any(marks)

    return at_least_one.astype(np.int8) + at_least_two + all_three


def grid_search_binary_thresholds(
    frame_triples: Sequence[Any],
    labels: Sequence[int],
    grid_step: float = DEFAULT_GRID_STEP,
) -> GridSearchResult:
    """Find the binary thresholds maximizing video kappa of the Threshold rule.

    Args:
        frame_triples: One (F, 3) array of member probabilities per video.
        labels: Video MES labels.
        grid_step: Grid spacing over [0, 1] for every threshold.

    Raises:
        ThresholdError: If the evaluation set is empty or the grid step is invalid.
    """
    y = _check_labels(labels, len(frame_triples))
    grid = threshold_grid(grid_step, 1.0)
    size = grid.size
    w = quadratic_weights(N_CLASSES)

    observed = np.zeros((size,) * 3, dtype=np.int64)
    column_counts = np.zeros((N_CLASSES, *(size,) * 3), dtype=np.int64)
    for triples, label in zip(frame_triples, y, strict=True):
        values = np.asarray(triples, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            msg = "Every video needs at least one frame triple"
            raise ThresholdError(msg)
        scores_sum(values)  # validates the triples
        classes = _video_classes_on_grid(_rank_on_grid(grid, values), size)
        observed += w[label][classes]
        for c in range(N_CLASSES):
            column_counts[c] += classes == c

    rows = np.bincount(y, minlength=N_CLASSES)
    expected = np.tensordot(w.T @ rows, column_counts, axes=1)
    kappa = _kappa_grid(observed, y.size, expected)

    best = np.unravel_index(int(np.argmax(kappa)), kappa.shape)
    thresholds = BinaryThresholds(*(float(grid[i]) for i in best))
    logger.debug("Binary grid search over %d points: best %s", kappa.size, thresholds.as_tuple())
    return GridSearchResult(thresholds, float(kappa[best]))


def grid_search_ordinal_thresholds(
    video_scores: Sequence[float],
    labels: Sequence[int],
    grid_step: float = DEFAULT_GRID_STEP,
) -> GridSearchResult:
    """Find ordered ordinal thresholds maximizing video kappa.

    Args:
        video_scores: One continuous score in [0, 3] per video (max Sum score, or clipped s_v).
        labels: Video MES labels.
        grid_step: Grid spacing over [0, 3]. Thresholds take interior grid points only.

    Raises:
        ThresholdError: If the evaluation set is empty or the grid is too coarse for three
            interior thresholds.
    """
    scores = np.asarray(video_scores, dtype=np.float64)
    y = _check_labels(labels, scores.size)
    if not np.all((scores >= 0.0) & (scores <= MAX_MES)):
        msg = "Video scores must lie in [0, 3]"
        raise ThresholdError(msg)

    grid = threshold_grid(grid_step, float(MAX_MES))
    n = grid.size - 1
    if n < 4:
        msg = f"Grid step {grid_step} leaves fewer than three interior thresholds on [0, 3]"
        raise ThresholdError(msg)

    # below[c, j] = videos of truth c whose rank is below j
    ranks = _rank_on_grid(grid, scores)
    rank_counts = np.zeros((N_CLASSES, n + 2), dtype=np.int64)
    np.add.at(rank_counts, (y, ranks + 1), 1)
    below = np.cumsum(rank_counts, axis=1)
    totals = below[:, -1]

    w = quadratic_weights(N_CLASSES)
    u = w.T @ totals
    j1s, j2s = np.triu_indices(n, k=1)
    keep = j1s >= 1
    j1s, j2s = j1s[keep], j2s[keep]

    best_kappa = -np.inf
    best = (1, 2, 3)
    for j0 in range(1, n - 2):
        pairs = j1s > j0
        a, b = j1s[pairs], j2s[pairs]
        counts = np.stack(
            [
                np.broadcast_to(below[:, j0][:, None], (N_CLASSES, a.size)),
                below[:, a] - below[:, j0][:, None],
                below[:, b] - below[:, a],
                totals[:, None] - below[:, b],
            ],
            axis=1,
        )  # (truth, predicted class, pair)
        observed = np.einsum("tc,tcp->p", w, counts)
        expected = u @ counts.sum(axis=0)
        kappa = _kappa_grid(observed, y.size, expected)
        i = int(np.argmax(kappa))
        if kappa[i] > best_kappa:
            best_kappa = float(kappa[i])
            best = (j0, int(a[i]), int(b[i]))

    thresholds = OrdinalThresholds(*(float(grid[j]) for j in best))
    logger.debug("Ordinal grid search: best %s (kappa %.4f)", thresholds.as_tuple(), best_kappa)
    return GridSearchResult(thresholds, best_kappa)


def video_scores_sum(frame_triples: Sequence[Any]) -> list[float]:
    """Per-video Sum-rule score: the maximum frame q."""
    return [float(scores_sum(t).max()) for t in frame_triples]


def evaluate_binary_thresholds(
    frame_triples: Sequence[Any], labels: Sequence[int], thresholds: BinaryThresholds
) -> float:
    """Video kappa of the Threshold rule at fixed thresholds."""
    y = _check_labels(labels, len(frame_triples))
    pred = [int(classes_threshold(t, thresholds).max()) for t in frame_triples]
    return cohen_kappa_quadratic(ConfusionMatrix.from_labels(y, pred))


def evaluate_ordinal_thresholds(
    video_scores: Sequence[float], labels: Sequence[int], thresholds: OrdinalThresholds
) -> float:
    """Video kappa of ordinal binning at fixed thresholds."""
    y = _check_labels(labels, len(video_scores))
    pred = bin_ordinal_many(video_scores, thresholds)
    return cohen_kappa_quadratic(ConfusionMatrix.from_labels(y, pred))
