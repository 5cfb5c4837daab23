"""Run configuration, read from a single TOML file.

Every section is optional. Section seeds default to the top-level seed plus a fixed offset, so a
single top-level seed pins every random stream of a run:

    schema_version = 1
    seed = 0

    [synthetic]        # SyntheticSpec fields
    [cv]               folds, seed
    [train]            epochs, lr, weight_decay, hidden_dims, shuffle, seed
    [train.ensemble]   k_values (one K per ranked member)
    [train.regression] loss, k_negative
    [tune]             binary_grid_step, ordinal_grid_step
    [qc]               enabled, lam, epochs, labeled_frames, seed
    [eval]             binary_threshold, max_frames
    [eval.raters]      count, noise, frames_per_class, seed
    [sweep]            member, k_values
    [output]           trace_timing
"""

from __future__ import annotations

import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from ordmil.dataset import MAX_MES, SyntheticSpec
from ordmil.errors import ConfigError, OrdmilError
from ordmil.mil import TrainConfig
from ordmil.ordinal import DEFAULT_GRID_STEP, threshold_grid
from ordmil.qcfilter import SvmConfig
from ordmil.scorer import LossKind

SCHEMA_VERSION = 1

# Offsets added to the top-level seed for sections that do not set their own
SEED_OFFSETS = {"synthetic": 0, "cv": 1, "train": 2, "qc": 3, "raters": 4}

DEFAULT_ENSEMBLE_K = (40, 100, 40)
DEFAULT_REGRESSION_K = 10
DEFAULT_SWEEP_K = (1, 5, 10, 20, 40, 100, 200)


@dataclass(frozen=True)
class CvSettings:
    """Subject-grouped cross-validation."""

    folds: int = 5
    seed: int = 0


@dataclass(frozen=True)
class TrainSettings:
    """Training settings shared by every scorer, plus per-model extras."""

    base: TrainConfig = field(default_factory=TrainConfig)
    ensemble_k: tuple[int, int, int] = DEFAULT_ENSEMBLE_K
    regression_loss: LossKind = LossKind.MAE
    regression_k: int = DEFAULT_REGRESSION_K

    def member_config(self, member: int, fold: int) -> TrainConfig:
        """Config of ranked member `member` in fold `fold`."""
        return self.base.with_overrides(
            loss_kind=LossKind.BCE,
            k_negative=self.ensemble_k[member],
            seed=self.base.seed + 10 * fold + member,
        )

    def regression_config(self, fold: int) -> TrainConfig:
        """Config of the regression scorer in fold `fold`."""
        return self.base.with_overrides(
            loss_kind=self.regression_loss,
            k_negative=self.regression_k,
            seed=self.base.seed + 10 * fold + 3,
        )


@dataclass(frozen=True)
class TuneSettings:
    """Threshold grid resolutions."""

    binary_grid_step: float = DEFAULT_GRID_STEP
    ordinal_grid_step: float = DEFAULT_GRID_STEP


@dataclass(frozen=True)
class QcSettings:
    """Quality-control SVM stage."""

    enabled: bool = False
    svm: SvmConfig = field(default_factory=SvmConfig)
    labeled_frames: int = 4200


@dataclass(frozen=True)
class RaterSettings:
    """Simulated multi-rater frame study."""

    count: int = 4
    noise: float = 0.3
    frames_per_class: int = 50
    seed: int = 0


@dataclass(frozen=True)
class EvalSettings:
    """Evaluation options."""

    binary_threshold: float = 0.5
    max_frames: bool = True
    raters: RaterSettings = field(default_factory=RaterSettings)


@dataclass(frozen=True)
class SweepSettings:
    """Top-K sweep for one ranked member."""

    member: int = 0
    k_values: tuple[int, ...] = DEFAULT_SWEEP_K


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run configuration and the raw text it came from."""

    text: str
    seed: int
    synthetic: SyntheticSpec
    cv: CvSettings
    train: TrainSettings
    tune: TuneSettings
    qc: QcSettings
    eval: EvalSettings
    sweep: SweepSettings
    trace_timing: bool = False


def _table(data: dict[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    table = data.get(name, {})
    if not isinstance(table, dict):
        msg = f"[{name}] must be a table"
        raise ConfigError(msg)
    unknown = sorted(set(table) - allowed)
    if unknown:
        msg = f"Unknown key {unknown[0]!r} in [{name}]"
        raise ConfigError(msg)
    return table


def _plain_fields(cls: type) -> set[str]:
    return {f.name for f in fields(cls)}


def parse_run_config(text: str, seed_override: int | None = None) -> RunConfig:
    """Validate config text into a RunConfig.

    Raises:
        ConfigError: If the text is not valid TOML or fails schema validation. The message names
            the offending key or section.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        msg = f"Config is not valid TOML: {e}"
        raise ConfigError(msg) from e

    known = {"schema_version", "seed", "synthetic", "cv", "train", "tune", "qc", "eval", "sweep", "output"}
    unknown = sorted(set(data) - known)
    if unknown:
        msg = f"Unknown top-level key {unknown[0]!r}"
        raise ConfigError(msg)
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        msg = f"schema_version must be {SCHEMA_VERSION}, got {data['schema_version']!r}"
        raise ConfigError(msg)

    seed = data.get("seed", 0) if seed_override is None else seed_override
    if not isinstance(seed, int) or isinstance(seed, bool):
        msg = f"seed must be an integer, got {seed!r}"
        raise ConfigError(msg)

    def seed_for(table: dict[str, Any], section: str) -> int:
        return int(table.get("seed", seed + SEED_OFFSETS[section]))

    try:
        synthetic = _table(data, "synthetic", _plain_fields(SyntheticSpec))
        spec = SyntheticSpec(**{**synthetic, "seed": seed_for(synthetic, "synthetic")})

        cv_table = _table(data, "cv", {"folds", "seed"})
        cv = CvSettings(folds=int(cv_table.get("folds", 5)), seed=seed_for(cv_table, "cv"))
        if cv.folds < 2:
            msg = f"[cv] folds must be at least 2, got {cv.folds}"
            raise ConfigError(msg)

        train = _parse_train(data, seed_for)
        tune = _parse_tune(data)
        qc = _parse_qc(data, seed_for)
        evaluation = _parse_eval(data, seed_for)
        sweep = _parse_sweep(data)
        output = _table(data, "output", {"trace_timing"})
    except ConfigError:
        raise
    except (OrdmilError, TypeError, ValueError) as e:
        msg = f"Invalid config: {e}"
        raise ConfigError(msg) from e

    return RunConfig(
        text=text,
        seed=seed,
        synthetic=spec,
        cv=cv,
        train=train,
        tune=tune,
        qc=qc,
        eval=evaluation,
        sweep=sweep,
        trace_timing=bool(output.get("trace_timing", False)),
    )


def _parse_train(data: dict[str, Any], seed_for: Any) -> TrainSettings:
    table = _table(
        data, "train", {"epochs", "lr", "weight_decay", "hidden_dims", "shuffle", "seed", "ensemble", "regression"}
    )
    ensemble = _table(table, "ensemble", {"k_values"})
    regression = _table(table, "regression", {"loss", "k_negative"})
    shared = {k: v for k, v in table.items() if k not in {"ensemble", "regression", "seed"}}
    base = TrainConfig(**shared, seed=seed_for(table, "train"))

    k_values = tuple(int(k) for k in ensemble.get("k_values", DEFAULT_ENSEMBLE_K))
    if len(k_values) != MAX_MES or any(k < 1 for k in k_values):
        msg = f"[train.ensemble] k_values must be three positive integers, got {k_values}"
        raise ConfigError(msg)

    loss = LossKind(regression.get("loss", LossKind.MAE))
    if loss is LossKind.BCE:
        msg = "[train.regression] loss cannot be bce; use mae, mse, smooth_l1 or log_cosh"
        raise ConfigError(msg)
    return TrainSettings(
        base=base,
        ensemble_k=(k_values[0], k_values[1], k_values[2]),
        regression_loss=loss,
        regression_k=int(regression.get("k_negative", DEFAULT_REGRESSION_K)),
    )


def _parse_tune(data: dict[str, Any]) -> TuneSettings:
    table = _table(data, "tune", {"binary_grid_step", "ordinal_grid_step"})
    tune = TuneSettings(
        binary_grid_step=float(table.get("binary_grid_step", DEFAULT_GRID_STEP)),
        ordinal_grid_step=float(table.get("ordinal_grid_step", DEFAULT_GRID_STEP)),
    )
    threshold_grid(tune.binary_grid_step, 1.0)
    threshold_grid(tune.ordinal_grid_step, float(MAX_MES))
    return tune


def _parse_qc(data: dict[str, Any], seed_for: Any) -> QcSettings:
    table = _table(data, "qc", {"enabled", "lam", "epochs", "labeled_frames", "seed"})
    svm = SvmConfig(
        lam=float(table.get("lam", 1e-3)),
        epochs=int(table.get("epochs", 20)),
        seed=seed_for(table, "qc"),
    )
    qc = QcSettings(
        enabled=bool(table.get("enabled", False)),
        svm=svm,
        labeled_frames=int(table.get("labeled_frames", 4200)),
    )
    if qc.labeled_frames < 2:
        msg = f"[qc] labeled_frames must be at least 2, got {qc.labeled_frames}"
        raise ConfigError(msg)
    return qc


def _parse_eval(data: dict[str, Any], seed_for: Any) -> EvalSettings:
    table = _table(data, "eval", {"binary_threshold", "max_frames", "raters"})
    raters = _table(table, "raters", {"count", "noise", "frames_per_class", "seed"})
    settings = EvalSettings(
        binary_threshold=float(table.get("binary_threshold", 0.5)),
        max_frames=bool(table.get("max_frames", True)),
        raters=RaterSettings(
            count=int(raters.get("count", 4)),
            noise=float(raters.get("noise", 0.3)),
            frames_per_class=int(raters.get("frames_per_class", 50)),
            seed=seed_for(raters, "raters"),
        ),
    )
    if not 0.0 <= settings.binary_threshold <= 1.0:
        msg = f"[eval] binary_threshold must be in [0, 1], got {settings.binary_threshold}"
        raise ConfigError(msg)
    if settings.raters.count < 2 or not 0.0 <= settings.raters.noise <= 1.0:
        msg = "[eval.raters] needs count >= 2 and noise in [0, 1]"
        raise ConfigError(msg)
    return settings


def _parse_sweep(data: dict[str, Any]) -> SweepSettings:
    table = _table(data, "sweep", {"member", "k_values"})
    sweep = SweepSettings(
        member=int(table.get("member", 0)),
        k_values=tuple(int(k) for k in table.get("k_values", DEFAULT_SWEEP_K)),
    )
    if sweep.member not in range(MAX_MES) or not sweep.k_values or min(sweep.k_values) < 1:
        msg = "[sweep] member must be 0, 1 or 2 and k_values positive integers"
        raise ConfigError(msg)
    return sweep


def load_run_config(path: Path | str, seed_override: int | None = None) -> RunConfig:
    """Read and validate a run config file.

    Raises:
        ConfigError: If the file fails validation.
        OSError: If the file cannot be read.
    """
    return parse_run_config(Path(path).read_text(encoding="utf-8"), seed_override)
