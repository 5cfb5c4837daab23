"""Pipeline commands.

Each command reads what earlier commands wrote under the run directory, writes its own outputs,
reads them back to validate them, and prints a short summary.
"""

from __future__ import annotations

import csv
import tomllib
from collections import defaultdict
from typing import TYPE_CHECKING, Any

import numpy as np
import tomlkit
from polykit import PolyLog
from rich.console import Console
from rich.table import Table

from ordmil.cli.artifacts import (
    POOLED_SCOPE,
    ArtifactError,
    load_qc_stats,
    load_thresholds,
    save_qc_stats,
    save_thresholds,
    verify_csv,
)
from ordmil.cli.parallel import run_jobs
from ordmil.dataset import (
    N_CLASSES,
    generate_synthetic,
    grouped_kfold,
    load_dataset,
    load_folds,
    relabel_binary,
    save_dataset,
    save_folds,
)
from ordmil.metrics import (
    ConfusionMatrix,
    FoldSummary,
    MetricError,
    MetricsReport,
    adjust_frame_label,
    cohen_kappa_quadratic,
    consensus_labels,
    exceeding_fraction,
    fleiss_kappa,
    load_report,
    per_rater_kappa,
    quadratic_kappa,
    roc_auc,
    save_report,
    simulate_raters,
)
from ordmil.mil import (
    predict_video_binary,
    score_bag,
    train_binary_mil,
    train_regression_mil,
    video_scores_binary,
    write_trace,
)
from ordmil.ordinal import (
    FRAME_SCORE_COLUMNS,
    MEMBER_NAMES,
    REGRESSION_COLUMNS,
    EnsembleModel,
    bin_ordinal_many,
    classes_convert,
    classes_threshold,
    frame_score_rows,
    grid_search_binary_thresholds,
    grid_search_ordinal_thresholds,
    save_ensemble,
    scores_sum,
    threshold_grid,
    video_scores_regression,
    video_scores_sum,
    write_frame_scores,
)
from ordmil.provenance import config_sha256, provenance_table
from ordmil.qcfilter import (
    artifact_training_frames,
    filter_dataset,
    load_svm,
    save_svm,
    svm_accuracy,
    train_svm,
)
from ordmil.scorer import load_model, save_model

if TYPE_CHECKING:
    from ordmil.cli.config import RunConfig
    from ordmil.cli.layout import RunLayout
    from ordmil.dataset import Dataset, FoldAssignment
    from ordmil.mil import TrainResult
    from ordmil.ordinal import BinaryThresholds, OrdinalThresholds
    from ordmil.scorer import ScorerModel

logger = PolyLog.get_logger("ordmil.cli")
console = Console()

REGRESSION = "regression"
TRAIN_MODES: dict[str, tuple[str, ...]] = {
    "gt0": ("gt0",),
    "gt1": ("gt1",),
    "gt2": ("gt2",),
    "ensemble": MEMBER_NAMES,
    "regression": (REGRESSION,),
    "all": (*MEMBER_NAMES, REGRESSION),
}
TUNE_MODES = ("ensemble", "regression", "all")
QC_MODES = ("train", "filter")
VIDEO_METHODS = ("convert", "threshold", "sum", "regression")
MAX_FRAME_COLUMNS = ("video_id", "label", "p_v", "max_frame", "outcome", "is_artifact")

# Share of the labeled quality-control frames held out to measure SVM accuracy
QC_HOLDOUT = 0.2


def working_dataset(config: RunConfig, layout: RunLayout) -> Dataset:
    """The dataset train, tune and eval operate on: filtered when quality control is enabled.

    Raises:
        ArtifactError: If the dataset has not been generated or filtered yet.
    """
    path = layout.filtered if config.qc.enabled else layout.dataset
    if not path.exists():
        step = "ordmil qc --mode filter" if config.qc.enabled else "ordmil gen"
        msg = f"No dataset at {path}; run `{step}` first"
        raise ArtifactError(msg)
    return load_dataset(path)


def _folds_to_run(assignment: FoldAssignment, fold: int | None) -> list[int]:
    if fold is None:
        return list(range(assignment.k))
    if fold not in range(assignment.k):
        msg = f"--fold must be in 0..{assignment.k - 1}, got {fold}"
        raise ArtifactError(msg)
    return [fold]


def _load_folds(layout: RunLayout) -> FoldAssignment:
    if not layout.folds.exists():
        msg = f"No fold assignment at {layout.folds}; run `ordmil gen` first"
        raise ArtifactError(msg)
    return load_folds(layout.folds)


def _load_ensemble(config: RunConfig, layout: RunLayout, fold: int) -> EnsembleModel:
    members = [load_model(layout.model(fold, name)) for name in MEMBER_NAMES]
    return EnsembleModel((members[0], members[1], members[2]), config.train.ensemble_k)


def _has_models(layout: RunLayout, fold: int, names: tuple[str, ...]) -> bool:
    return all(layout.model(fold, name).exists() for name in names)


# gen


def cmd_gen(config: RunConfig, layout: RunLayout) -> Dataset:
    """Generate the synthetic dataset and its subject-grouped folds."""
    dataset = generate_synthetic(config.synthetic)
    folds = grouped_kfold(dataset, config.cv.folds, config.cv.seed)
    save_dataset(dataset, layout.dataset, config_sha256(config.text))
    save_folds(folds, layout.folds)

    if load_dataset(layout.dataset) != dataset or load_folds(layout.folds) != folds:
        msg = f"Dataset files under {layout.dataset.parent} did not read back identically"
        raise ArtifactError(msg)

    table = Table(title=f"{len(dataset)} videos, {dataset.n_frames} frames, {folds.k} folds")
    table.add_column("MES", justify="right")
    table.add_column("videos", justify="right")
    for mes, count in enumerate(dataset.class_histogram()):
        table.add_row(str(mes), str(count))
    console.print(table)
    logger.info("Wrote %s", layout.dataset)
    return dataset


# qc


def cmd_qc(config: RunConfig, layout: RunLayout, mode: str) -> dict[str, Any]:
    """Train the artifact SVM (`train`) or apply it to the dataset (`filter`)."""
    if mode not in QC_MODES:
        msg = f"qc mode must be one of {', '.join(QC_MODES)}, got {mode!r}"
        raise ArtifactError(msg)
    if not layout.dataset.exists():
        msg = f"No dataset at {layout.dataset}; run `ordmil gen` first"
        raise ArtifactError(msg)
    dataset = load_dataset(layout.dataset)
    return _qc_train(config, layout, dataset) if mode == "train" else _qc_filter(config, layout, dataset)


def _qc_train(config: RunConfig, layout: RunLayout, dataset: Dataset) -> dict[str, Any]:
    frames, labels = artifact_training_frames(dataset, config.qc.labeled_frames, config.qc.svm.seed)
    n_test = max(1, int(round(QC_HOLDOUT * labels.size)))
    svm = train_svm(frames[n_test:], labels[n_test:], config.qc.svm)
    accuracy = svm_accuracy(svm, frames[:n_test], labels[:n_test])

    save_svm(svm, layout.svm)
    if load_svm(layout.svm) != svm:
        msg = f"{layout.svm} did not read back identically"
        raise ArtifactError(msg)

    stats = {
        "n_train": int(labels.size - n_test),
        "n_test": n_test,
        "holdout_accuracy": accuracy,
        "objective": svm.objective,
    }
    save_qc_stats(layout.qc_stats, "svm", stats, config)
    if load_qc_stats(layout.qc_stats).get("svm") != stats:
        msg = f"{layout.qc_stats} did not read back identically"
        raise ArtifactError(msg)

    console.print(f"SVM held-out accuracy: [bold]{accuracy:.3f}[/bold] on {n_test} frames")
    return stats


def _qc_filter(config: RunConfig, layout: RunLayout, dataset: Dataset) -> dict[str, Any]:
    if not layout.svm.exists():
        msg = f"No SVM at {layout.svm}; run `ordmil qc --mode train` first"
        raise ArtifactError(msg)
    svm = load_svm(layout.svm)
    filtered, filter_stats = filter_dataset(dataset, svm)
    save_dataset(filtered, layout.filtered, config_sha256(config.text))
    if load_dataset(layout.filtered) != filtered:
        msg = f"{layout.filtered} did not read back identically"
        raise ArtifactError(msg)

    stats = filter_stats.as_dict()
    save_qc_stats(layout.qc_stats, "filter", stats, config)
    console.print(
        f"Removed {filter_stats.frames_removed} of {filter_stats.frames_before} frames "
        f"({filter_stats.mean_decrease_pct:.1f}% per video), dropped {filter_stats.bags_dropped} videos"
    )
    return stats


# train


def _train_job(config: RunConfig, train_set: Dataset, name: str, fold: int, progress: bool) -> TrainResult:
    if name == REGRESSION:
        return train_regression_mil(train_set, config.train.regression_config(fold), progress=progress)
    member = MEMBER_NAMES.index(name)
    return train_binary_mil(
        relabel_binary(train_set, member), config.train.member_config(member, fold), progress=progress
    )


def cmd_train(config: RunConfig, layout: RunLayout, mode: str, fold: int | None = None, workers: int = 1) -> None:
    """Train the scorers selected by `mode` on the training part of every fold."""
    if mode not in TRAIN_MODES:
        msg = f"train mode must be one of {', '.join(TRAIN_MODES)}, got {mode!r}"
        raise ArtifactError(msg)
    names = TRAIN_MODES[mode]
    dataset = working_dataset(config, layout)
    folds = _load_folds(layout)
    fold_list = _folds_to_run(folds, fold)

    jobs = [
        (config, folds.split(dataset, f)[0], name, f, workers <= 1)
        for f in fold_list
        for name in names
    ]
    logger.info("Training %d models with %d worker(s)", len(jobs), max(1, workers))
    results = run_jobs(_train_job, jobs, workers)

    sha = config_sha256(config.text)
    trained: dict[int, dict[str, TrainResult]] = defaultdict(dict)
    for (_, _, name, f, _), result in zip(jobs, results, strict=True):
        trained[f][name] = result
        write_trace(result.trace, layout.trace(f, name), config.trace_timing)

    table = Table(title=f"train --mode {mode}")
    for column in ("fold", "model", "initial loss", "final loss"):
        table.add_column(column, justify="right")

    for f, models in trained.items():
        full_ensemble = all(name in models for name in MEMBER_NAMES)
        if full_ensemble:
            ensemble = EnsembleModel(
                (models["gt0"].model, models["gt1"].model, models["gt2"].model),
                config.train.ensemble_k,
            )
            save_ensemble(ensemble, layout.fold_dir(f), sha)
        for name, result in models.items():
            if not (full_ensemble and name in MEMBER_NAMES):
                save_model(result.model, layout.model(f, name), sha)
            if load_model(layout.model(f, name)) != result.model:
                msg = f"{layout.model(f, name)} did not read back identically"
                raise ArtifactError(msg)
            table.add_row(str(f), name, f"{result.initial_loss:.4f}", f"{result.final_loss:.4f}")

    console.print(table)


# tune


def cmd_tune(
    config: RunConfig,
    layout: RunLayout,
    mode: str = "all",
    fold: int | None = None,
    grid_step: float | None = None,
) -> None:
    """Grid-search thresholds on each fold's validation videos, and pooled over all folds."""
    if mode not in TUNE_MODES:
        msg = f"tune mode must be one of {', '.join(TUNE_MODES)}, got {mode!r}"
        raise ArtifactError(msg)
    binary_step = grid_step or config.tune.binary_grid_step
    ordinal_step = grid_step or config.tune.ordinal_grid_step
    threshold_grid(binary_step, 1.0)

    dataset = working_dataset(config, layout)
    folds = _load_folds(layout)
    fold_list = _folds_to_run(folds, fold)
    with_ensemble = mode in {"ensemble", "all"}
    with_regression = mode in {"regression", "all"}

    results: dict[str, dict[str, Any]] = {}
    pooled: dict[str, list[Any]] = defaultdict(list)
    for f in fold_list:
        _, validation = folds.split(dataset, f)
        if len(validation) == 0:
            msg = f"Fold {f} has no validation videos"
            raise ArtifactError(msg)
        labels = [bag.mes for bag in validation]
        pooled["labels"] += labels
        scope = results.setdefault(f"fold{f}", {})

        if with_ensemble:
            ensemble = _load_ensemble(config, layout, f)
            triples = [ensemble.score_frames(bag) for bag in validation]
            sums = video_scores_sum(triples)
            scope["threshold"] = grid_search_binary_thresholds(triples, labels, binary_step)
            scope["sum"] = grid_search_ordinal_thresholds(sums, labels, ordinal_step)
            pooled["triples"] += triples
            pooled["sum"] += sums
        if with_regression:
            scores = video_scores_regression(load_model(layout.model(f, REGRESSION)), validation)
            scope[REGRESSION] = grid_search_ordinal_thresholds(scores, labels, ordinal_step)
            pooled[REGRESSION] += scores

    if len(fold_list) > 1:
        scope = results.setdefault(POOLED_SCOPE, {})
        if with_ensemble:
            scope["threshold"] = grid_search_binary_thresholds(pooled["triples"], pooled["labels"], binary_step)
            scope["sum"] = grid_search_ordinal_thresholds(pooled["sum"], pooled["labels"], ordinal_step)
        if with_regression:
            scope[REGRESSION] = grid_search_ordinal_thresholds(pooled[REGRESSION], pooled["labels"], ordinal_step)

    merged = save_thresholds(layout.thresholds, results, config, (binary_step, ordinal_step))
    if load_thresholds(layout.thresholds) != merged:
        msg = f"{layout.thresholds} did not read back identically"
        raise ArtifactError(msg)

    table = Table(title="tuned thresholds")
    for column in ("scope", "method", "thresholds", "kappa"):
        table.add_column(column)
    for scope_name, methods in results.items():
        for method, result in methods.items():
            values = ", ".join(f"{t:g}" for t in result.thresholds.as_tuple())
            table.add_row(scope_name, method, values, f"{result.kappa:.4f}")
    console.print(table)


# eval


class _FoldEvaluation:
    """Accumulates per-fold statistics and pooled confusion matrices."""

    def __init__(self) -> None:
        self.video: dict[str, list[float]] = defaultdict(list)
        self.frame: dict[str, list[float]] = defaultdict(list)
        self.auc: dict[str, list[float]] = defaultdict(list)
        self.confusion: dict[str, ConfusionMatrix] = {}

    def add(self, level: str, method: str, truth: list[int], pred: list[int]) -> None:
        cm = ConfusionMatrix.from_labels(truth, pred, N_CLASSES)
        getattr(self, level)[method].append(cohen_kappa_quadratic(cm))
        key = f"{level}_{method}"
        self.confusion[key] = self.confusion[key].add(cm) if key in self.confusion else cm


def _pick_thresholds(thresholds: dict[str, dict[str, Any]], fold: int, method: str) -> Any:
    """Pooled thresholds when tuned, otherwise the fold's own."""
    for scope in (POOLED_SCOPE, f"fold{fold}"):
        if method in thresholds.get(scope, {}):
            return thresholds[scope][method].thresholds
    return None


def cmd_eval(config: RunConfig, layout: RunLayout, fold: int | None = None) -> MetricsReport:
    """Evaluate every available method on each fold's validation videos and write the report."""
    dataset = working_dataset(config, layout)
    folds = _load_folds(layout)
    thresholds = load_thresholds(layout.thresholds)
    evaluation = _FoldEvaluation()

    for f in _folds_to_run(folds, fold):
        _, validation = folds.split(dataset, f)
        bt: BinaryThresholds | None = _pick_thresholds(thresholds, f, "threshold")
        ot_sum: OrdinalThresholds | None = _pick_thresholds(thresholds, f, "sum")
        ot_reg: OrdinalThresholds | None = _pick_thresholds(thresholds, f, REGRESSION)

        ensemble = None
        if bt is not None and ot_sum is not None and _has_models(layout, f, MEMBER_NAMES):
            ensemble = _load_ensemble(config, layout, f)
        regression = None
        if ot_reg is not None and _has_models(layout, f, (REGRESSION,)):
            regression = load_model(layout.model(f, REGRESSION))
        if ensemble is None and regression is None:
            msg = f"Fold {f} has no trained and tuned models; run `ordmil train` and `ordmil tune` first"
            raise ArtifactError(msg)

        _evaluate_fold(evaluation, validation, ensemble, regression, bt, ot_sum, ot_reg)
        if ensemble is not None:
            _member_aucs(evaluation, ensemble, validation)
            rows = frame_score_rows(ensemble, validation, bt, ot_sum, regression, ot_reg)  # type: ignore[arg-type]
            write_frame_scores(rows, layout.frame_scores(f))
            columns = FRAME_SCORE_COLUMNS + (REGRESSION_COLUMNS if regression is not None else ())
            verify_csv(layout.frame_scores(f), columns, sum(bag.n_frames for bag in validation))
            if config.eval.max_frames:
                _write_max_frames(ensemble.members[0], validation, config.eval.binary_threshold, layout.max_frames(f))

    report = MetricsReport(
        seed=config.seed,
        config_text=config.text,
        video={m: FoldSummary.from_values(v) for m, v in evaluation.video.items()},
        auc={m: FoldSummary.from_values(v) for m, v in evaluation.auc.items()},
        frame={m: FoldSummary.from_values(v) for m, v in evaluation.frame.items()},
        confusion=evaluation.confusion,
        raters=_rater_study(config, dataset),
        qc=load_qc_stats(layout.qc_stats) or None,
    )
    save_report(report, layout.report)
    load_report(layout.report)

    table = Table(title="video-level quadratic kappa")
    for column in ("method", "mean", "95% CI"):
        table.add_column(column)
    for method, summary in report.video.items():
        table.add_row(method, f"{summary.mean:.3f}", f"{summary.lower:.3f} - {summary.upper:.3f}")
    console.print(table)
    return report


def _evaluate_fold(
    evaluation: _FoldEvaluation,
    validation: Dataset,
    ensemble: EnsembleModel | None,
    regression: ScorerModel | None,
    bt: BinaryThresholds | None,
    ot_sum: OrdinalThresholds | None,
    ot_reg: OrdinalThresholds | None,
) -> None:
    video_truth = [bag.mes for bag in validation]
    video_pred: dict[str, list[int]] = defaultdict(list)
    frame_truth: list[int] = []
    frame_pred: dict[str, list[int]] = defaultdict(list)

    for bag in validation:
        frame_classes: dict[str, np.ndarray] = {}
        if ensemble is not None:
            triples = ensemble.score_frames(bag)
            frame_classes["convert"] = classes_convert(triples)
            frame_classes["threshold"] = classes_threshold(triples, bt)  # type: ignore[arg-type]
            frame_classes["sum"] = bin_ordinal_many(scores_sum(triples), ot_sum)  # type: ignore[arg-type]
        if regression is not None:
            raw = np.clip(score_bag(regression, bag), 0.0, 3.0)
            frame_classes[REGRESSION] = bin_ordinal_many(raw, ot_reg)  # type: ignore[arg-type]

        for method, classes in frame_classes.items():
            video_pred[method].append(int(classes.max()))
        if bag.planted_frame_labels is not None:
            frame_truth += [adjust_frame_label(label, bag.mes) for label in bag.planted_frame_labels]
            for method, classes in frame_classes.items():
                frame_pred[method] += classes.tolist()

    for method in VIDEO_METHODS:
        if method in video_pred:
            evaluation.add("video", method, video_truth, video_pred[method])
        if method in frame_pred and frame_truth:
            evaluation.add("frame", method, frame_truth, frame_pred[method])


def _member_aucs(evaluation: _FoldEvaluation, ensemble: EnsembleModel, validation: Dataset) -> None:
    for m, (name, member) in enumerate(zip(MEMBER_NAMES, ensemble.members, strict=True)):
        labels = [int(bag.mes > m) for bag in validation]
        try:
            evaluation.auc[name].append(roc_auc(video_scores_binary(member, validation), labels))
        except MetricError as e:
            logger.warning("Skipping %s AUC: %s", name, e)


def _write_max_frames(model: ScorerModel, validation: Dataset, threshold: float, path: Any) -> None:
    """List every video's highest-scoring frame under the φ>0 scorer with its outcome."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MAX_FRAME_COLUMNS)
        for bag in validation:
            prediction = predict_video_binary(model, bag, threshold)
            truth = int(bag.mes > 0)
            outcome = ("T" if prediction.label == truth else "F") + ("P" if prediction.label else "N")
            artifact = "" if bag.artifact_frames is None else int(bag.artifact_frames[prediction.frame])
            writer.writerow([bag.video_id, truth, repr(prediction.p_v), prediction.frame, outcome, artifact])
    verify_csv(path, MAX_FRAME_COLUMNS, len(validation))


def _rater_study(config: RunConfig, dataset: Dataset) -> dict[str, Any] | None:
    """Simulated multi-rater study on frames sampled per planted class."""
    settings = config.eval.raters
    planted, videos = [], []
    for bag in dataset:
        if bag.planted_frame_labels is not None:
            planted += list(bag.planted_frame_labels)
            videos += [bag.mes] * bag.n_frames
    if not planted:
        return None

    rng = np.random.default_rng(settings.seed)
    planted_arr, videos_arr = np.asarray(planted), np.asarray(videos)
    chosen = []
    for c in range(N_CLASSES):
        candidates = np.flatnonzero(planted_arr == c)
        if candidates.size:
            size = min(settings.frames_per_class, candidates.size)
            chosen.append(np.sort(rng.choice(candidates, size=size, replace=False)))
    idx = np.concatenate(chosen)
    truth, video_labels = planted_arr[idx], videos_arr[idx]

    table = simulate_raters(truth, settings.count, settings.noise, settings.seed + 1)
    consensus = consensus_labels(table, video_labels)
    return {
        "n_frames": int(idx.size),
        "count": settings.count,
        "noise": settings.noise,
        "fleiss_kappa": fleiss_kappa(table),
        "per_rater_kappa": per_rater_kappa(table, consensus),
        "consensus_kappa": quadratic_kappa(truth, consensus),
        "exceeding_fraction": exceeding_fraction(
            table.ratings.ravel(), np.repeat(video_labels, table.n_raters)
        ),
    }


# sweep


def _sweep_job(
    config: RunConfig, train_set: Dataset, validation: Dataset, member: int, k: int, fold: int
) -> tuple[float, int]:
    member_config = config.train.member_config(member, fold).with_overrides(k_negative=k)
    result = train_binary_mil(relabel_binary(train_set, member), member_config)
    labels = [int(bag.mes > member) for bag in validation]
    return roc_auc(video_scores_binary(result.model, validation), labels), result.trace[-1].n_samples


def cmd_sweep(config: RunConfig, layout: RunLayout, fold: int | None = None, workers: int = 1) -> dict[int, FoldSummary]:
    """Cross-validated top-K sweep for one ranked member."""
    dataset = working_dataset(config, layout)
    folds = _load_folds(layout)
    fold_list = _folds_to_run(folds, fold)
    member = config.sweep.member
    splits = {f: folds.split(dataset, f) for f in fold_list}

    jobs = [(config, *splits[f], member, k, f) for k in config.sweep.k_values for f in fold_list]
    results = iter(run_jobs(_sweep_job, jobs, workers))

    doc = tomlkit.document()
    doc["schema_version"] = 1
    doc["provenance"] = provenance_table(config.text, config.seed)
    doc["member"] = MEMBER_NAMES[member]
    section = tomlkit.table(is_super_table=True)
    summaries: dict[int, FoldSummary] = {}
    for k in config.sweep.k_values:
        aucs, samples = zip(*(next(results) for _ in fold_list), strict=True)
        summaries[k] = FoldSummary.from_values(aucs)
        table = summaries[k].to_table()
        table["n_samples"] = list(samples)
        section[f"k{k}"] = table
    doc["k"] = section

    layout.sweep.parent.mkdir(parents=True, exist_ok=True)
    layout.sweep.write_text(tomlkit.dumps(doc), encoding="utf-8")
    written = tomllib.loads(layout.sweep.read_text(encoding="utf-8"))
    if sorted(written.get("k", {})) != sorted(f"k{k}" for k in config.sweep.k_values):
        msg = f"{layout.sweep} did not read back with every K"
        raise ArtifactError(msg)

    table = Table(title=f"top-K sweep for {MEMBER_NAMES[member]}")
    for column in ("K", "mean AUC", "95% CI"):
        table.add_column(column, justify="right")
    for k, summary in summaries.items():
        table.add_row(str(k), f"{summary.mean:.3f}", f"{summary.lower:.3f} - {summary.upper:.3f}")
    console.print(table)
    return summaries
