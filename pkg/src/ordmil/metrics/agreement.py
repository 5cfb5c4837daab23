"""Agreement statistics: confusion matrices, quadratic weighted Cohen's kappa and Fleiss kappa.

Quadratic kappa is evaluated from integer statistics. With integer weights (i - j)^2 (the usual
(M - 1)^2 normalization cancels out of the ratio), kappa = 1 - O * N / S, where O is the weighted
observed disagreement count, N the sample count and S the weighted sum of marginal products. Equal
tables therefore always give bit-identical kappas, which threshold tuning relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from ordmil.dataset import N_CLASSES
from ordmil.errors import OrdmilError

if TYPE_CHECKING:
    from collections.abc import Sequence

type CountMatrix = np.ndarray[Any, np.dtype[np.int64]]


class MetricError(OrdmilError):
    """Raised when a statistic is undefined for its input."""


def quadratic_weights(n_classes: int) -> CountMatrix:
    """Integer disagreement weights (i - j)^2."""
    idx = np.arange(n_classes)
    return (idx[:, None] - idx[None, :]) ** 2


@dataclass(eq=False)
class ConfusionMatrix:
    """Square count matrix with rows as truth and columns as prediction."""

    counts: CountMatrix

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
            msg = f"Confusion matrix must be square with at least 2 classes, got shape {counts.shape}"
            raise MetricError(msg)
        if not np.all(counts == np.round(counts)) or np.any(counts < 0):
            msg = "Confusion matrix entries must be nonnegative integers"
            raise MetricError(msg)
        self.counts = counts.astype(np.int64)

    @classmethod
    def from_labels(cls, truth: Sequence[int], pred: Sequence[int], n_classes: int = N_CLASSES) -> ConfusionMatrix:
        """Tally paired labels.

        Raises:
            MetricError: If the sequences differ in length or hold out-of-range labels.
        """
        t = np.asarray(truth, dtype=np.int64)
        p = np.asarray(pred, dtype=np.int64)
        if t.shape != p.shape or t.ndim != 1:
            msg = f"Truth and prediction must be equally long 1-D sequences, got {t.shape} and {p.shape}"
            raise MetricError(msg)
        if t.size and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= n_classes):
            msg = f"Labels must lie in 0..{n_classes - 1}"
            raise MetricError(msg)

        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (t, p), 1)
        return cls(counts)

    @property
    def n_classes(self) -> int:
        """Number of classes M."""
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        """Number of tallied samples."""
        return int(self.counts.sum())

    def add(self, other: ConfusionMatrix) -> ConfusionMatrix:
        """Element-wise sum, used to pool folds."""
        if other.n_classes != self.n_classes:
            msg = "Cannot add confusion matrices of different sizes"
            raise MetricError(msg)
        return ConfusionMatrix(self.counts + other.counts)

    def to_list(self) -> list[list[int]]:
        """Nested lists of plain ints."""
        return self.counts.tolist()

    def to_csv(self, path: Path | str) -> None:
        """Write the matrix as a delimited table, one truth row per line."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["truth", *(f"pred_{j}" for j in range(self.n_classes))])
            for i, row in enumerate(self.to_list()):
                writer.writerow([i, *row])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


def kappa_from_stats(observed: int, n: int, expected: int) -> float:
    """Quadratic kappa from integer disagreement statistics.

    Raises:
        MetricError: If expected disagreement is 0 but observed disagreement is not.
    """
    if n <= 0:
        msg = "Kappa needs at least one sample"
        raise MetricError(msg)
    if expected == 0:
        if observed == 0:
            return 1.0
        msg = "Kappa is undefined: no expected disagreement but some observed disagreement"
        raise MetricError(msg)
    return 1.0 - (int(observed) * int(n)) / int(expected)


def kappa_statistics(cm: ConfusionMatrix) -> tuple[int, int, int]:
    """(observed, n, expected) integer statistics of a confusion matrix."""
    w = quadratic_weights(cm.n_classes)
    rows = cm.counts.sum(axis=1)
    cols = cm.counts.sum(axis=0)
    observed = int((w * cm.counts).sum())
    expected = int(rows @ w @ cols)
    return observed, cm.total, expected


def cohen_kappa_quadratic(cm: ConfusionMatrix) -> float:
    """Quadratic weighted Cohen's kappa of a confusion matrix, in [-1, 1].

    Returns exactly 1.0 for diagonal matrices.

    Raises:
        MetricError: If the matrix is empty or kappa is undefined.
    """
    return kappa_from_stats(*kappa_statistics(cm))


def quadratic_kappa(truth: Sequence[int], pred: Sequence[int], n_classes: int = N_CLASSES) -> float:
    """Quadratic weighted kappa of paired label sequences."""
    return cohen_kappa_quadratic(ConfusionMatrix.from_labels(truth, pred, n_classes))


@dataclass(eq=False)
class RatingTable:
    """Complete N-items by R-raters table of class labels.

    Raises:
        MetricError: If ratings are missing or out of range, or there are fewer than 2 raters.
    """

    ratings: CountMatrix
    n_classes: int = N_CLASSES

    def __post_init__(self):
        values = np.asarray(self.ratings, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            msg = f"Rating table must be a non-empty items-by-raters matrix, got shape {values.shape}"
            raise MetricError(msg)
        if values.shape[1] < 2:
            msg = f"Rating table needs at least 2 raters, got {values.shape[1]}"
            raise MetricError(msg)
        if not np.all(np.isfinite(values)):
            msg = "Rating table is incomplete (missing ratings)"
            raise MetricError(msg)
        if np.any(values != np.round(values)) or values.min() < 0 or values.max() >= self.n_classes:
            msg = f"Ratings must be integer classes in 0..{self.n_classes - 1}"
            raise MetricError(msg)
        self.ratings = values.astype(np.int64)

    @property
    def n_items(self) -> int:
        """Number of rated items."""
        return self.ratings.shape[0]

    @property
    def n_raters(self) -> int:
        """Number of raters."""
        return self.ratings.shape[1]

    def category_counts(self) -> CountMatrix:
        """Items-by-classes matrix of how many raters chose each class."""
        counts = np.zeros((self.n_items, self.n_classes), dtype=np.int64)
        np.add.at(counts, (np.repeat(np.arange(self.n_items), self.n_raters), self.ratings.ravel()), 1)
        return counts


def fleiss_kappa(table: RatingTable) -> float:
    """Unweighted Fleiss kappa of a complete rating table.

    A table where every rater always chooses the same single class has no expected disagreement
    and is reported as perfect agreement (1.0).
    """
    counts = table.category_counts()
    r = table.n_raters
    per_item = ((counts**2).sum(axis=1) - r) / (r * (r - 1))
    observed = float(per_item.mean())

    proportions = counts.sum(axis=0) / (table.n_items * r)
    expected = float(proportions @ proportions)
    if expected >= 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def per_rater_kappa(table: RatingTable, reference: Sequence[int]) -> list[float]:
    """Quadratic weighted kappa of each rater against a reference labeling."""
    ref = np.asarray(reference, dtype=np.int64)
    if ref.shape != (table.n_items,):
        msg = f"Reference has {ref.shape} labels for {table.n_items} items"
        raise MetricError(msg)
    return [quadratic_kappa(ref, table.ratings[:, j], table.n_classes) for j in range(table.n_raters)]


def simulate_raters(truth: Sequence[int], count: int, noise: float, seed: int, n_classes: int = N_CLASSES) -> RatingTable:
    """Simulate raters who report the true class with probability 1 - noise.

    Otherwise a rater reports a neighbouring class, one step up or down with equal odds, clipped
    to the valid range.
    """
    if count < 2:
        msg = f"Need at least 2 simulated raters, got {count}"
        raise MetricError(msg)
    if not 0.0 <= noise <= 1.0:
        msg = f"Rater noise must be in [0, 1], got {noise}"
        raise MetricError(msg)

    rng = np.random.default_rng(seed)
    t = np.asarray(truth, dtype=np.int64)
    flip = rng.random((t.size, count)) < noise
    step = rng.choice(np.array([-1, 1]), size=(t.size, count))
    ratings = np.clip(t[:, None] + flip * step, 0, n_classes - 1)
    return RatingTable(ratings, n_classes)
