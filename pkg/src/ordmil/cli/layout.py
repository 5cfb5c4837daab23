from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class RunLayout:
    """Fixed file names under a run's output directory."""

    root: Path

    @property
    def dataset(self) -> Path:
        """Generated dataset."""
        return self.root / "dataset" / "dataset.jsonl"

    @property
    def filtered(self) -> Path:
        """Dataset after quality-control filtering."""
        return self.root / "dataset" / "filtered.jsonl"

    @property
    def folds(self) -> Path:
        """Subject-to-fold assignment."""
        return self.root / "dataset" / "folds.toml"

    def fold_dir(self, fold: int) -> Path:
        """Model directory of one fold."""
        return self.root / "models" / f"fold{fold}"

    def model(self, fold: int, name: str) -> Path:
        """Model file of one scorer (gt0, gt1, gt2 or regression) in one fold."""
        return self.fold_dir(fold) / f"{name}.json"

    def trace(self, fold: int, name: str) -> Path:
        """Loss trace of one scorer in one fold."""
        return self.fold_dir(fold) / f"{name}_trace.csv"

    @property
    def svm(self) -> Path:
        """Quality-control SVM."""
        return self.root / "models" / "svm.json"

    @property
    def thresholds(self) -> Path:
        """Tuned thresholds."""
        return self.root / "thresholds" / "thresholds.toml"

    @property
    def reports(self) -> Path:
        """Report directory."""
        return self.root / "reports"

    @property
    def report(self) -> Path:
        """Evaluation report."""
        return self.reports / "report.toml"

    @property
    def qc_stats(self) -> Path:
        """Quality-control statistics."""
        return self.reports / "qc_stats.toml"

    @property
    def sweep(self) -> Path:
        """Top-K sweep results."""
        return self.reports / "sweep.toml"

    def frame_scores(self, fold: int) -> Path:
        """Per-frame score dump of one fold."""
        return self.reports / f"frame_scores_fold{fold}.csv"

    def max_frames(self, fold: int) -> Path:
        """Max-frame inspection list of one fold."""
        return self.reports / f"max_frames_fold{fold}.csv"
