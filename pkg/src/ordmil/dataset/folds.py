"""Subject-grouped k-fold splitting with greedy class balancing."""

from __future__ import annotations

import tomllib
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import tomlkit

from ordmil.dataset.bags import N_CLASSES, Dataset, DatasetError

if TYPE_CHECKING:
    from pathlib import Path

    from ordmil.dataset.bags import VideoBag

FOLDS_VERSION = 1


@dataclass(frozen=True)
class FoldAssignment:
    """Maps every subject to exactly one fold in [0, k)."""

    k: int
    fold_of_subject: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        bad = {s: f for s, f in self.fold_of_subject.items() if f not in range(self.k)}
        if bad:
            msg = f"Fold indices outside [0, {self.k}): {sorted(bad.items())[:5]}"
            raise DatasetError(msg)

    def fold_of(self, bag: VideoBag) -> int:
        """Fold index of a bag, via its subject.

        Raises:
            DatasetError: If the bag's subject has no fold.
        """
        try:
            return self.fold_of_subject[bag.subject_id]
        except KeyError:
            msg = f"Subject {bag.subject_id!r} has no fold assignment"
            raise DatasetError(msg) from None

    def split(self, dataset: Dataset, fold: int) -> tuple[Dataset, Dataset]:
        """Return (train, validation) for one fold, validation being the fold itself."""
        if fold not in range(self.k):
            msg = f"Fold {fold} outside [0, {self.k})"
            raise DatasetError(msg)
        train = [bag for bag in dataset if self.fold_of(bag) != fold]
        validation = [bag for bag in dataset if self.fold_of(bag) == fold]
        return dataset.with_bags(train), dataset.with_bags(validation)

    def fold_sizes(self, dataset: Dataset) -> list[int]:
        """Number of bags in each fold."""
        counts = Counter(self.fold_of(bag) for bag in dataset)
        return [counts.get(fold, 0) for fold in range(self.k)]


def grouped_kfold(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Assign subjects to k folds so no subject spans two folds.

    Subjects are visited in descending bag count (ties in a seeded random order). Each goes to
    the fold that leaves the per-class fill (fold class count over global class count) most even
    across folds, then the fold with the fewest bags overall, then the lowest index. A subject
    whose bags share one class therefore goes to the fold holding the fewest bags of that class.

    Raises:
        DatasetError: If k < 2 or there are fewer subjects than folds.
    """
    if k < 2:
        msg = f"Need at least 2 folds, got {k}"
        raise DatasetError(msg)

    bags_by_subject: dict[str, list[int]] = {}
    for bag in dataset:
        bags_by_subject.setdefault(bag.subject_id, []).append(bag.mes)

    if len(bags_by_subject) < k:
        msg = f"Cannot make {k} folds from {len(bags_by_subject)} subjects"
        raise DatasetError(msg)

    rng = np.random.default_rng(seed)
    subjects = list(bags_by_subject)
    shuffled = [subjects[i] for i in rng.permutation(len(subjects))]
    ordered = sorted(shuffled, key=lambda s: -len(bags_by_subject[s]))

    global_counts = np.maximum(np.bincount([bag.mes for bag in dataset], minlength=N_CLASSES), 1)
    class_counts = np.zeros((k, N_CLASSES), dtype=int)
    fold_totals = np.zeros(k, dtype=int)
    fold_of_subject = {}

    for subject in ordered:
        labels = bags_by_subject[subject]
        added = np.bincount(labels, minlength=N_CLASSES)
        spread = [_fill_spread(class_counts, fold, added, global_counts) for fold in range(k)]
        fold = min(range(k), key=lambda f: (spread[f], fold_totals[f], f))
        fold_of_subject[subject] = fold
        class_counts[fold] += added
        fold_totals[fold] += len(labels)

    return FoldAssignment(k, dict(sorted(fold_of_subject.items())))


def _fill_spread(class_counts: np.ndarray, fold: int, added: np.ndarray, global_counts: np.ndarray) -> float:
    """Summed across-fold standard deviation of class fill if `added` joined `fold`."""
    trial = class_counts.copy()
    trial[fold] += added
    return round(float(np.std(trial / global_counts, axis=0).sum()), 12)


def save_folds(assignment: FoldAssignment, path: Path) -> None:
    """Write a fold assignment as a TOML document."""
    doc = tomlkit.document()
    doc["version"] = FOLDS_VERSION
    doc["k"] = assignment.k
    subjects = tomlkit.table()
    for subject, fold in assignment.fold_of_subject.items():
        subjects[subject] = fold
    doc["subjects"] = subjects
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomlkit.dumps(doc), encoding="utf-8")


def load_folds(path: Path) -> FoldAssignment:
    """Read a fold assignment written by `save_folds`.

    Raises:
        DatasetError: If the document is malformed.
    """
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
        return FoldAssignment(int(data["k"]), {str(s): int(f) for s, f in data["subjects"].items()})
    except (tomllib.TOMLDecodeError, KeyError, TypeError, AttributeError) as e:
        msg = f"Malformed fold file {path}: {e}"
        raise DatasetError(msg) from e
