"""Files the commands share: tuned thresholds, quality-control statistics and CSV read-back checks.

The TOML files are rebuilt in full on every write, merging what is already there, so the same sequence
of commands always produces the same bytes.
"""

from __future__ import annotations

import csv
import tomllib
from typing import TYPE_CHECKING, Any

import tomlkit

from ordmil.errors import OrdmilError
from ordmil.ordinal import BinaryThresholds, GridSearchResult, OrdinalThresholds
from ordmil.provenance import provenance_table

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from ordmil.cli.config import RunConfig

ARTIFACT_SCHEMA_VERSION = 1

# Threshold methods: "threshold" holds binary thresholds, the others ordinal thresholds
BINARY_METHOD = "threshold"
THRESHOLD_METHODS = ("threshold", "sum", "regression")
POOLED_SCOPE = "pooled"

type ThresholdSet = dict[str, dict[str, GridSearchResult]]


class ArtifactError(OrdmilError):
    """Raised when a shared output file is missing pieces or malformed."""


def _read(path: Path) -> dict[str, Any]:
    if not path.exists():
        return {}
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        msg = f"{path} is not valid TOML: {e}"
        raise ArtifactError(msg) from e
    if data.get("schema_version") != ARTIFACT_SCHEMA_VERSION:
        msg = f"{path} has an unsupported schema_version"
        raise ArtifactError(msg)
    return data


def _result_from_table(method: str, table: dict[str, Any]) -> GridSearchResult:
    if method == BINARY_METHOD:
        thresholds: BinaryThresholds | OrdinalThresholds = BinaryThresholds(
            table["t1"], table["t2"], table["t3"]
        )
    else:
        thresholds = OrdinalThresholds(table["t0"], table["t1"], table["t2"])
    return GridSearchResult(thresholds, float(table["kappa"]))


def _result_table(result: GridSearchResult) -> Any:
    table = tomlkit.table()
    names = ("t1", "t2", "t3") if isinstance(result.thresholds, BinaryThresholds) else ("t0", "t1", "t2")
    for name, value in zip(names, result.thresholds.as_tuple(), strict=True):
        table[name] = value
    table["kappa"] = result.kappa
    return table


def load_thresholds(path: Path) -> ThresholdSet:
    """Read tuned thresholds, keyed by scope ("fold0", ..., "pooled") and method.

    Raises:
        ArtifactError: If the file is missing or malformed.
    """
    if not path.exists():
        msg = f"No tuned thresholds at {path}; run `ordmil tune` first"
        raise ArtifactError(msg)

    data = _read(path)
    results: ThresholdSet = {}
    try:
        for scope, methods in data.get("scopes", {}).items():
            results[scope] = {
                method: _result_from_table(method, table)
                for method, table in methods.items()
                if method in THRESHOLD_METHODS
            }
    except (KeyError, TypeError, OrdmilError) as e:
        msg = f"{path} has invalid thresholds: {e}"
        raise ArtifactError(msg) from e
    return results


def save_thresholds(path: Path, new: ThresholdSet, config: RunConfig, grid_steps: tuple[float, float]) -> ThresholdSet:
    """Merge new tuning results into the thresholds file and return the merged set.

    Re-tuning any fold for a method without also re-tuning the pooled scope drops that method's
    pooled thresholds.
    """
    merged = load_thresholds(path) if path.exists() else {}
    retuned = {method for scope, methods in new.items() if scope != POOLED_SCOPE for method in methods}
    stale = retuned - set(new.get(POOLED_SCOPE, {}))
    if stale and POOLED_SCOPE in merged:
        for method in stale:
            merged[POOLED_SCOPE].pop(method, None)
        if not merged[POOLED_SCOPE]:
            del merged[POOLED_SCOPE]

    for scope, methods in new.items():
        merged.setdefault(scope, {}).update(methods)

    doc = tomlkit.document()
    doc["schema_version"] = ARTIFACT_SCHEMA_VERSION
    doc["provenance"] = provenance_table(config.text, config.seed)
    grid = tomlkit.table()
    grid["binary_step"], grid["ordinal_step"] = grid_steps
    doc["grid"] = grid

    scopes = tomlkit.table(is_super_table=True)
    for scope in sorted(merged):
        methods = tomlkit.table(is_super_table=True)
        for method in THRESHOLD_METHODS:
            if method in merged[scope]:
                methods[method] = _result_table(merged[scope][method])
        scopes[scope] = methods
    doc["scopes"] = scopes

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomlkit.dumps(doc), encoding="utf-8")
    return merged


def load_qc_stats(path: Path) -> dict[str, Any]:
    """Read quality-control statistics (sections "svm" and "filter"); empty if absent."""
    data = _read(path)
    return {key: value for key, value in data.items() if key in {"svm", "filter"}}


def save_qc_stats(path: Path, section: str, values: dict[str, Any], config: RunConfig) -> dict[str, Any]:
    """Replace one section of the quality-control statistics file and return all sections."""
    sections = load_qc_stats(path)
    sections[section] = values

    doc = tomlkit.document()
    doc["schema_version"] = ARTIFACT_SCHEMA_VERSION
    doc["provenance"] = provenance_table(config.text, config.seed)
    for name in ("svm", "filter"):
        if name in sections:
            doc[name] = sections[name]

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(tomlkit.dumps(doc), encoding="utf-8")
    return sections


def verify_csv(path: Path, columns: Sequence[str], n_rows: int) -> None:
    """Read a freshly written CSV back and check its header and row count.

    Raises:
        ArtifactError: If the file is missing, the header differs or the row count is off.
    """
    if not path.exists():
        msg = f"Expected a table at {path}"
        raise ArtifactError(msg)
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, [])
        rows = sum(1 for row in reader if len(row) == len(header))
    if header != list(columns):
        msg = f"{path} has columns {header}, expected {list(columns)}"
        raise ArtifactError(msg)
    if rows != n_rows:
        msg = f"{path} has {rows} well-formed rows, expected {n_rows}"
        raise ArtifactError(msg)
