from __future__ import annotations

import csv
import itertools
from typing import TYPE_CHECKING

import numpy as np
import pytest
from helpers import identity_scorer, make_bag

from ordmil.metrics import quadratic_kappa
from ordmil.mil import TrainConfig
from ordmil.ordinal import (
    BinaryThresholds,
    EnsembleModel,
    OrdinalThresholds,
    ThresholdError,
    aggregate_convert,
    aggregate_sum,
    aggregate_threshold,
    bin_ordinal,
    bin_ordinal_many,
    classes_convert,
    classes_threshold,
    convert_probabilities,
    evaluate_binary_thresholds,
    frame_score_rows,
    grid_search_binary_thresholds,
    grid_search_ordinal_thresholds,
    load_ensemble,
    predict_video_ensemble,
    predict_video_regression,
    save_ensemble,
    scores_sum,
    threshold_grid,
    train_ensemble,
    video_class,
    video_scores_sum,
    write_frame_scores,
)
from ordmil.ordinal.ensemble import FRAME_SCORE_COLUMNS, REGRESSION_COLUMNS
from ordmil.scorer import Head, ScorerError, ScorerModel

if TYPE_CHECKING:
    from pathlib import Path

    from ordmil.dataset import Dataset

FAST = TrainConfig(epochs=2, lr=1e-2, hidden_dims=(4,), seed=2)
# 50 validation videos covering every class
LABELS = [0, 1, 2, 3] * 12 + [0, 3]


def zero_ensemble(dim: int = 3) -> EnsembleModel:
    """Ensemble whose members all output 0.5."""
    members = tuple(ScorerModel.zeros((dim, 2, 1), Head.SIGMOID) for _ in range(3))
    return EnsembleModel(members, (1, 1, 1))  # type: ignore[arg-type]


class TestThresholdTypes:
    def test_binary_range(self):
        assert BinaryThresholds(0.0, 1.0, 0.3).as_tuple() == (0.0, 1.0, 0.3)
        with pytest.raises(ThresholdError):
            BinaryThresholds(0.2, 1.2, 0.3)

    @pytest.mark.parametrize("values", [(1.0, 0.5, 2.0), (0.0, 1.0, 2.0), (1.0, 2.0, 3.0), (1.0, 1.0, 2.0)])
    def test_ordinal_must_be_strictly_inside(self, values: tuple[float, float, float]):
        with pytest.raises(ThresholdError):
            OrdinalThresholds(*values)

    def test_grid(self):
        np.testing.assert_array_equal(threshold_grid(0.25), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert threshold_grid(0.01)[-1] == 1.0
        assert threshold_grid(0.5, 3.0).size == 7

    @pytest.mark.parametrize("step", [0.3, 0.0, -0.1, 2.0])
    def test_grid_rejects_bad_steps(self, step: float):
        with pytest.raises(ThresholdError):
            threshold_grid(step)


class TestAggregation:
    def test_convert_example(self):
        label, probs = aggregate_convert((0.9, 0.7, 0.2))
        assert label == 2
        assert probs == pytest.approx((0.1, 0.2, 0.5, 0.2))

    def test_convert_extremes(self):
        assert aggregate_convert((0.0, 0.0, 0.0))[0] == 0
        assert aggregate_convert((1.0, 1.0, 1.0))[0] == 3

    def test_convert_keeps_negative_entries(self):
        probs = convert_probabilities([(0.2, 0.8, 0.1)])[0]
        assert probs[1] < 0
        assert probs.sum() == pytest.approx(1.0)

    def test_threshold_example(self):
        assert aggregate_threshold((0.25, 0.21, 0.10), BinaryThresholds(0.20, 0.19, 0.22)) == 2

    def test_threshold_is_inclusive(self):
        assert aggregate_threshold((0.5, 0.5, 0.5), BinaryThresholds(0.5, 0.5, 0.5)) == 3

    def test_sum_and_binning(self):
        q = aggregate_sum((0.9, 0.7, 0.2))
        assert q == pytest.approx(1.8)
        assert bin_ordinal(q, OrdinalThresholds(0.1, 1.04, 2.02)) == 2
        assert bin_ordinal(2.5, OrdinalThresholds(1.03, 1.97, 2.79)) == 2

    def test_bin_boundary_goes_up(self):
        thresholds = OrdinalThresholds(0.1, 1.04, 2.02)
        assert bin_ordinal(1.04, thresholds) == 2
        assert bin_ordinal(0.0, thresholds) == 0
        assert bin_ordinal(3.0, thresholds) == 3

    def test_rejects_out_of_range_probabilities(self):
        with pytest.raises(ThresholdError):
            aggregate_sum((0.5, 1.5, 0.0))

    def test_video_class(self):
        assert video_class([0, 2, 1]) == 2
        with pytest.raises(ThresholdError):
            video_class([])


def reference_classes(
    triple: tuple[float, float, float], binary: BinaryThresholds, ordinal: OrdinalThresholds
) -> tuple[int, int, int]:
    """Plain-Python Convert, Threshold and Sum classes of one triple."""
    p0, p1, p2 = triple
    probs = [1.0 - p0, p0 - p1, p1 - p2, p2]
    convert = max(range(4), key=lambda j: probs[j])
    threshold = sum(p >= t for p, t in zip(triple, binary.as_tuple(), strict=True))
    q = p0 + p1 + p2
    summed = sum(q >= t for t in ordinal.as_tuple())
    return convert, threshold, summed


class TestAggregationOracle:
    def test_full_grid_matches_reference(self):
        grid = threshold_grid(0.05)
        triples = np.array(list(itertools.product(grid, repeat=3)))
        binary = BinaryThresholds(0.35, 0.5, 0.65)
        ordinal = OrdinalThresholds(0.6, 1.45, 2.2)

        convert = classes_convert(triples)
        threshold = classes_threshold(triples, binary)
        summed = bin_ordinal_many(scores_sum(triples), ordinal)
        mismatches = sum(
            (int(c), int(t), int(s)) != reference_classes(tuple(row), binary, ordinal)
            for row, c, t, s in zip(triples.tolist(), convert, threshold, summed, strict=True)
        )
        assert mismatches == 0

    def test_convert_rows_sum_to_one(self):
        triples = np.random.default_rng(5).random((100_000, 3))
        np.testing.assert_allclose(convert_probabilities(triples).sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_sum_class_is_monotone(self):
        rng = np.random.default_rng(6)
        low = rng.random((10_000, 3))
        high = np.minimum(low + rng.random((10_000, 3)) * (1 - low), 1.0)
        thresholds = OrdinalThresholds(0.6, 1.45, 2.2)
        assert np.all(
            bin_ordinal_many(scores_sum(high), thresholds) >= bin_ordinal_many(scores_sum(low), thresholds)
        )


def random_videos(rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.random((int(rng.integers(1, 5)), 3)) for _ in LABELS]


class TestBinaryGridSearch:
    def test_matches_brute_force(self, rng: np.random.Generator):
        videos = random_videos(rng)
        grid = threshold_grid(0.25)
        best, best_kappa = None, -np.inf
        for combo in itertools.product(grid, repeat=3):
            thresholds = BinaryThresholds(*combo)
            pred = [int(classes_threshold(v, thresholds).max()) for v in videos]
            kappa = quadratic_kappa(LABELS, pred)
            if kappa > best_kappa:
                best, best_kappa = combo, kappa

        result = grid_search_binary_thresholds(videos, LABELS, 0.25)
        assert result.thresholds.as_tuple() == tuple(float(t) for t in best)
        assert result.kappa == best_kappa

    def test_perfect_separation_picks_smallest_thresholds(self):
        by_class = {0: (0.1, 0.1, 0.1), 1: (0.9, 0.1, 0.1), 2: (0.9, 0.9, 0.1), 3: (0.9, 0.9, 0.9)}
        videos = [np.array([by_class[label]]) for label in LABELS]
        result = grid_search_binary_thresholds(videos, LABELS, 0.25)
        assert result.thresholds.as_tuple() == (0.25, 0.25, 0.25)
        assert result.kappa == 1.0

    def test_not_worse_than_fixed_point(self, rng: np.random.Generator):
        videos = random_videos(rng)
        result = grid_search_binary_thresholds(videos, LABELS, 0.05)
        fixed = evaluate_binary_thresholds(videos, LABELS, BinaryThresholds(0.5, 0.5, 0.5))
        assert result.kappa >= fixed
        assert evaluate_binary_thresholds(videos, LABELS, result.thresholds) == result.kappa

    def test_rejects_empty_and_bad_step(self, rng: np.random.Generator):
        with pytest.raises(ThresholdError, match="empty"):
            grid_search_binary_thresholds([], [], 0.25)
        with pytest.raises(ThresholdError):
            grid_search_binary_thresholds(random_videos(rng), LABELS, 0.3)


class TestOrdinalGridSearch:
    def test_matches_brute_force(self, rng: np.random.Generator):
        scores = rng.uniform(0.0, 3.0, len(LABELS))
        interior = threshold_grid(0.25, 3.0)[1:-1]
        best, best_kappa = None, -np.inf
        for combo in itertools.combinations(interior, 3):
            thresholds = OrdinalThresholds(*combo)
            kappa = quadratic_kappa(LABELS, [bin_ordinal(s, thresholds) for s in scores])
            if kappa > best_kappa:
                best, best_kappa = combo, kappa

        result = grid_search_ordinal_thresholds(scores, LABELS, 0.25)
        assert result.thresholds.as_tuple() == tuple(float(t) for t in best)
        assert result.kappa == best_kappa

    def test_perfect_separation(self):
        by_class = {0: 0.2, 1: 1.1, 2: 2.0, 3: 2.9}
        result = grid_search_ordinal_thresholds([by_class[label] for label in LABELS], LABELS, 0.25)
        assert result.thresholds.as_tuple() == (0.25, 1.25, 2.25)
        assert result.kappa == 1.0

    def test_sum_scores_feed_search(self, rng: np.random.Generator):
        videos = random_videos(rng)
        scores = video_scores_sum(videos)
        assert scores == [pytest.approx(v.sum(axis=1).max()) for v in videos]
        result = grid_search_ordinal_thresholds(scores, LABELS, 0.1)
        assert 0 < result.thresholds.t0 < result.thresholds.t1 < result.thresholds.t2 < 3

    def test_rejects_coarse_grid_and_bad_scores(self):
        with pytest.raises(ThresholdError, match="interior"):
            grid_search_ordinal_thresholds([0.5, 1.5, 2.5], [0, 1, 2], 1.0)
        with pytest.raises(ThresholdError):
            grid_search_ordinal_thresholds([3.5], [3], 0.25)
        with pytest.raises(ThresholdError):
            grid_search_ordinal_thresholds([], [], 0.25)


class TestEnsembleModel:
    def test_validation(self):
        sigmoid = ScorerModel.zeros((3, 2, 1), Head.SIGMOID)
        with pytest.raises(ScorerError, match="sigmoid"):
            EnsembleModel((sigmoid, sigmoid, ScorerModel.zeros((3, 2, 1), Head.LINEAR)), (1, 1, 1))
        with pytest.raises(ScorerError, match="input dimension"):
            EnsembleModel((sigmoid, sigmoid, ScorerModel.zeros((4, 2, 1), Head.SIGMOID)), (1, 1, 1))

    def test_train_is_deterministic_and_ignores_traces_in_equality(self, small_dataset: Dataset):
        a = train_ensemble(small_dataset, [FAST] * 3)
        b = train_ensemble(small_dataset, [FAST] * 3)
        assert a == b
        assert len(a.traces) == 3
        assert a == EnsembleModel(a.members, a.k_values)
        assert a.input_dim == small_dataset.dim

    def test_needs_three_configs(self, small_dataset: Dataset):
        with pytest.raises(ThresholdError):
            train_ensemble(small_dataset, [FAST] * 2)

    def test_round_trip(self, small_dataset: Dataset, tmp_path: Path):
        configs = [FAST.with_overrides(k_negative=k) for k in (1, 3, 5)]
        ensemble = train_ensemble(small_dataset, configs)
        save_ensemble(ensemble, tmp_path / "fold0", config_sha256="abc")
        loaded = load_ensemble(tmp_path / "fold0")
        assert loaded == ensemble
        assert loaded.k_values == (1, 3, 5)

    def test_load_rejects_missing_k_values(self, tmp_path: Path):
        save_ensemble(zero_ensemble(), tmp_path)
        (tmp_path / "ensemble.toml").write_text("other = 1\n", encoding="utf-8")
        with pytest.raises(ScorerError, match="K values"):
            load_ensemble(tmp_path)


class TestPrediction:
    def test_ensemble_rules(self):
        prediction = predict_video_ensemble(
            zero_ensemble(dim=1),
            make_bag([0.0, 0.0]),
            BinaryThresholds(0.5, 0.5, 0.5),
            OrdinalThresholds(1.0, 2.0, 2.5),
        )
        # every member says 0.5: Convert ties at classes 0 and 3, Threshold counts three hits
        assert prediction.class_convert == 0
        assert prediction.class_threshold == 3
        assert prediction.q_v == pytest.approx(1.5)
        assert prediction.class_sum == 1

    @pytest.mark.parametrize(
        ("values", "expected"),
        [([0.5, 2.5, 1.0], (2.5, 2)), ([3.4], (3.0, 3)), ([-1.0, -0.5], (0.0, 0))],
    )
    def test_regression(self, values: list[float], expected: tuple[float, int]):
        thresholds = OrdinalThresholds(1.03, 1.97, 2.79)
        assert predict_video_regression(identity_scorer(Head.LINEAR), make_bag(values), thresholds) == expected

    def test_regression_needs_linear_head(self):
        with pytest.raises(ScorerError):
            predict_video_regression(identity_scorer(Head.SIGMOID), make_bag([1.0]), OrdinalThresholds(1, 2, 2.5))


class TestFrameScores:
    def test_rows_and_file(self, small_dataset: Dataset, tmp_path: Path):
        ensemble = zero_ensemble(small_dataset.dim)
        binary = BinaryThresholds(0.5, 0.5, 0.5)
        ordinal = OrdinalThresholds(1.0, 2.0, 2.5)
        rows = frame_score_rows(ensemble, small_dataset, binary, ordinal)
        assert len(rows) == small_dataset.n_frames
        assert all(len(row) == len(FRAME_SCORE_COLUMNS) for row in rows)
        assert rows[0][:2] == [small_dataset.bags[0].video_id, 0]

        write_frame_scores(rows, tmp_path / "scores.csv")
        with (tmp_path / "scores.csv").open(encoding="utf-8") as f:
            table = list(csv.reader(f))
        assert table[0] == list(FRAME_SCORE_COLUMNS)
        assert len(table) == len(rows) + 1

    def test_regression_columns(self, small_dataset: Dataset, tmp_path: Path):
        regression = ScorerModel.zeros((small_dataset.dim, 2, 1), Head.LINEAR)
        ordinal = OrdinalThresholds(1.0, 2.0, 2.5)
        rows = frame_score_rows(
            zero_ensemble(small_dataset.dim),
            small_dataset,
            BinaryThresholds(0.5, 0.5, 0.5),
            ordinal,
            regression=regression,
            regression_thresholds=ordinal,
        )
        assert rows[0][-2:] == ["0.0", 0]
        write_frame_scores(rows, tmp_path / "scores.csv")
        header = (tmp_path / "scores.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header.split(",") == [*FRAME_SCORE_COLUMNS, *REGRESSION_COLUMNS]
