"""Versioned evaluation report, stored as a TOML document.

Layout:

    schema_version = 1
    [provenance]           seed, config_sha256, config (verbatim)
    [video.<method>]       per-fold quadratic kappa with mean/lower/upper
    [auc.<member>]         per-fold ROC AUC of each ranked member
    [frame.<method>]       per-fold frame-level kappa against planted labels
    [confusion.<name>]     pooled count matrix, rows truth, columns prediction
    [raters]               simulated multi-rater study (optional)
    [qc]                   quality-control filter statistics (optional)
"""

from __future__ import annotations

import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import tomlkit

from ordmil.metrics.agreement import ConfusionMatrix, MetricError
from ordmil.metrics.intervals import fold_ci
from ordmil.provenance import provenance_table

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FoldSummary:
    """Per-fold values of one statistic and their confidence interval."""

    values: tuple[float, ...]
    mean: float
    lower: float
    upper: float

    @classmethod
    def from_values(cls, values: Sequence[float], level: float = 0.95) -> FoldSummary:
        """Summarize fold values. A single fold gives a zero-width interval."""
        vals = tuple(float(v) for v in values)
        if not vals:
            msg = "Cannot summarize zero fold values"
            raise MetricError(msg)
        if len(vals) == 1:
            return cls(vals, vals[0], vals[0], vals[0])
        return cls(vals, *fold_ci(vals, level))

    def to_table(self) -> Any:
        """TOML table of this summary."""
        table = tomlkit.table()
        table["values"] = list(self.values)
        table["mean"] = self.mean
        table["lower"] = self.lower
        table["upper"] = self.upper
        return table


@dataclass
class MetricsReport:
    """Everything `eval` measures for one run."""

    seed: int
    config_text: str
    video: dict[str, FoldSummary] = field(default_factory=dict)
    auc: dict[str, FoldSummary] = field(default_factory=dict)
    frame: dict[str, FoldSummary] = field(default_factory=dict)
    confusion: dict[str, ConfusionMatrix] = field(default_factory=dict)
    raters: dict[str, Any] | None = None
    qc: dict[str, Any] | None = None

    def to_document(self) -> tomlkit.TOMLDocument:
        """Render the report as a TOML document."""
        doc = tomlkit.document()
        doc["schema_version"] = REPORT_SCHEMA_VERSION
        doc["provenance"] = provenance_table(self.config_text, self.seed)
        for name in ("video", "auc", "frame"):
            section = tomlkit.table(is_super_table=True)
            for key, summary in getattr(self, name).items():
                section[key] = summary.to_table()
            doc[name] = section

        confusion = tomlkit.table(is_super_table=True)
        for key, cm in self.confusion.items():
            table = tomlkit.table()
            table["matrix"] = cm.to_list()
            confusion[key] = table
        doc["confusion"] = confusion

        if self.raters is not None:
            doc["raters"] = self.raters
        if self.qc is not None:
            doc["qc"] = self.qc
        return doc


def save_report(report: MetricsReport, path: Path | str) -> None:
    """Write a report and its confusion matrices as CSV files alongside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomlkit.dumps(report.to_document()), encoding="utf-8")
    for name, cm in report.confusion.items():
        cm.to_csv(path.parent / f"confusion_{name}.csv")


def load_report(path: Path | str) -> dict[str, Any]:
    """Read and validate a report file.

    Raises:
        MetricError: If the file is not valid TOML or fails validation.
    """
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        msg = f"{path} is not valid TOML: {e}"
        raise MetricError(msg) from e
    validate_report(doc)
    return doc


def validate_report(doc: Mapping[str, Any]) -> None:
    """Check a report's required keys, interval ordering and matrix shapes.

    Raises:
        MetricError: On the first problem found.
    """
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        msg = f"Report schema_version must be {REPORT_SCHEMA_VERSION}, got {doc.get('schema_version')!r}"
        raise MetricError(msg)
    provenance = doc.get("provenance")
    if not isinstance(provenance, dict) or not isinstance(provenance.get("config"), str):
        msg = "Report is missing [provenance] config"
        raise MetricError(msg)
    if not doc.get("video"):
        msg = "Report has no video-level results"
        raise MetricError(msg)

    for section in ("video", "auc", "frame"):
        for key, summary in doc.get(section, {}).items():
            _validate_summary(f"{section}.{key}", summary)

    for key, table in doc.get("confusion", {}).items():
        try:
            ConfusionMatrix(table["matrix"])
        except (KeyError, TypeError, ValueError) as e:
            msg = f"Report confusion.{key} is not a valid confusion matrix: {e}"
            raise MetricError(msg) from e


def _validate_summary(name: str, summary: Any) -> None:
    try:
        values = summary["values"]
        mean, lower, upper = summary["mean"], summary["lower"], summary["upper"]
    except (KeyError, TypeError) as e:
        msg = f"Report {name} is missing {e}"
        raise MetricError(msg) from e
    if not values:
        msg = f"Report {name} has no fold values"
        raise MetricError(msg)
    if not lower <= mean <= upper:
        msg = f"Report {name} interval is out of order: {lower} <= {mean} <= {upper} fails"
        raise MetricError(msg)
