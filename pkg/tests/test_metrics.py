from __future__ import annotations

import math
import statistics
from typing import TYPE_CHECKING

import numpy as np
import pytest

from ordmil.metrics import (
    ConfusionMatrix,
    FoldSummary,
    MetricError,
    MetricsReport,
    RatingTable,
    adjust_frame_label,
    cohen_kappa_quadratic,
    consensus_labels,
    exceeding_fraction,
    fleiss_kappa,
    fold_ci,
    kappa_statistics,
    load_report,
    majority_consensus,
    per_rater_kappa,
    quadratic_kappa,
    roc_auc,
    save_report,
    simulate_raters,
    validate_report,
)

if TYPE_CHECKING:
    from pathlib import Path

Z_95 = 1.959963984540054


class TestRocAuc:
    def test_example(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_perfect_and_constant(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_single_class(self):
        with pytest.raises(MetricError, match="one class"):
            roc_auc([0.1, 0.2], [1, 1])

    def test_invariant_under_monotone_transform(self, rng: np.random.Generator):
        scores = rng.standard_normal(40)
        labels = rng.integers(0, 2, 40)
        labels[:2] = (0, 1)
        assert roc_auc(np.exp(scores), labels) == roc_auc(scores, labels)


class TestQuadraticKappa:
    def test_identity(self):
        assert quadratic_kappa([0, 1, 2, 3, 3], [0, 1, 2, 3, 3]) == 1.0

    def test_full_reversal(self):
        assert quadratic_kappa([0, 0, 3, 3], [3, 3, 0, 0]) == -1.0

    def test_example(self):
        assert quadratic_kappa([0, 1, 2, 3], [1, 2, 3, 3]) == pytest.approx(0.7)
        assert kappa_statistics(ConfusionMatrix.from_labels([0, 1, 2, 3], [1, 2, 3, 3])) == (3, 4, 40)

    def test_invariant_under_class_reversal(self, rng: np.random.Generator):
        truth = rng.integers(0, 4, 30)
        pred = rng.integers(0, 4, 30)
        assert quadratic_kappa(3 - truth, 3 - pred) == pytest.approx(quadratic_kappa(truth, pred))

    def test_bounded(self, rng: np.random.Generator):
        for _ in range(20):
            kappa = quadratic_kappa(rng.integers(0, 4, 15), rng.integers(0, 4, 15))
            assert -1.0 <= kappa <= 1.0

    def test_undefined_cases(self):
        with pytest.raises(MetricError):
            cohen_kappa_quadratic(ConfusionMatrix(np.zeros((4, 4), dtype=int)))
        with pytest.raises(MetricError):
            quadratic_kappa([0, 4], [0, 0])


class TestConfusionMatrix:
    def test_csv(self, tmp_path: Path):
        cm = ConfusionMatrix.from_labels([0, 1], [0, 2])
        cm.to_csv(tmp_path / "cm.csv")
        lines = (tmp_path / "cm.csv").read_text(encoding="utf-8").splitlines()
        assert lines == ["truth,pred_0,pred_1,pred_2,pred_3", "0,1,0,0,0", "1,0,0,1,0", "2,0,0,0,0", "3,0,0,0,0"]

    def test_add_pools_counts(self):
        a = ConfusionMatrix.from_labels([0, 1], [0, 1])
        b = ConfusionMatrix.from_labels([1, 3], [2, 3])
        pooled = a.add(b)
        assert pooled.total == 4
        assert pooled == ConfusionMatrix.from_labels([0, 1, 1, 3], [0, 1, 2, 3])

    def test_rejects_bad_counts(self):
        with pytest.raises(MetricError):
            ConfusionMatrix(np.array([[1, -1], [0, 0]]))
        with pytest.raises(MetricError):
            ConfusionMatrix(np.zeros((2, 3)))


class TestFleiss:
    def test_constant_table(self):
        assert fleiss_kappa(RatingTable(np.full((5, 3), 2))) == 1.0

    def test_total_disagreement(self):
        assert fleiss_kappa(RatingTable(np.array([[0, 1], [1, 0]]))) == -1.0

    def test_perfect_agreement_across_classes(self):
        assert fleiss_kappa(RatingTable(np.array([[0, 0, 0], [1, 1, 1], [3, 3, 3]]))) == pytest.approx(1.0)

    def test_random_raters_near_zero(self):
        ratings = np.random.default_rng(0).integers(0, 4, (10_000, 4))
        assert abs(fleiss_kappa(RatingTable(ratings))) < 0.05

    def test_rating_table_errors(self):
        with pytest.raises(MetricError, match="incomplete"):
            RatingTable(np.array([[0.0, np.nan]]))
        with pytest.raises(MetricError, match="at least 2 raters"):
            RatingTable(np.array([[0], [1]]))
        with pytest.raises(MetricError):
            RatingTable(np.array([[0, 4]]))


class TestRaters:
    def test_noise_free_raters_agree_with_truth(self):
        truth = [0, 1, 2, 3] * 5
        table = simulate_raters(truth, 4, 0.0, seed=1)
        assert np.all(table.ratings == np.asarray(truth)[:, None])
        assert per_rater_kappa(table, truth) == [1.0] * 4
        assert fleiss_kappa(table) == pytest.approx(1.0)

    def test_noisy_raters_stay_in_range_and_replay(self):
        truth = [0, 3] * 20
        a = simulate_raters(truth, 3, 0.5, seed=2)
        b = simulate_raters(truth, 3, 0.5, seed=2)
        assert np.array_equal(a.ratings, b.ratings)
        assert a.ratings.min() >= 0
        assert a.ratings.max() <= 3

    def test_invalid(self):
        with pytest.raises(MetricError):
            simulate_raters([0, 1], 1, 0.1, seed=0)
        with pytest.raises(MetricError):
            simulate_raters([0, 1], 2, 1.5, seed=0)
        with pytest.raises(MetricError):
            per_rater_kappa(simulate_raters([0, 1], 2, 0.0, seed=0), [0])


class TestFoldCi:
    @pytest.mark.parametrize("value", [0.1, 0.3, 0.6, 0.7, 1.0 / 3.0])
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_identical_values_are_exact(self, value: float, n: int):
        assert fold_ci([value] * n) == (value, value, value)
        assert FoldSummary.from_values([value] * n).lower == value

    def test_symmetric(self):
        mean, lower, upper = fold_ci([0.0, 1.0])
        assert mean == 0.5
        assert lower + upper == pytest.approx(1.0)

    def test_matches_normal_interval(self):
        values = [0.61, 0.72, 0.55, 0.68, 0.70]
        half = Z_95 * statistics.stdev(values) / math.sqrt(len(values))
        mean, lower, upper = fold_ci(values)
        assert mean == pytest.approx(statistics.fmean(values))
        assert lower == pytest.approx(mean - half)
        assert upper == pytest.approx(mean + half)

    def test_wider_at_higher_level(self):
        values = [0.61, 0.72, 0.55]
        _, low_90, high_90 = fold_ci(values, 0.90)
        _, low_99, high_99 = fold_ci(values, 0.99)
        assert low_99 < low_90
        assert high_99 > high_90

    def test_needs_two_values(self):
        with pytest.raises(MetricError):
            fold_ci([0.5])
        with pytest.raises(MetricError):
            fold_ci([0.5, 0.6], level=1.0)


class TestConsensus:
    def test_adjust(self):
        assert adjust_frame_label(3, 1) == 1
        assert adjust_frame_label(0, 2) == 0

    @pytest.mark.parametrize(("ratings", "expected"), [([2, 2, 3, 1], 2), ([1, 1, 2, 2], 1), ([3], 3)])
    def test_majority(self, ratings: list[int], expected: int):
        assert majority_consensus(ratings) == expected

    def test_majority_empty(self):
        with pytest.raises(MetricError):
            majority_consensus([])

    def test_labels_are_capped_before_voting(self):
        table = RatingTable(np.array([[3, 3, 1], [2, 0, 0]]))
        assert consensus_labels(table, [1, 2]) == [1, 0]
        with pytest.raises(MetricError):
            consensus_labels(table, [1])

    @pytest.mark.parametrize(
        ("ratings", "videos", "expected"),
        [
            pytest.param([[2, 2, 2]], [3], [2], id="all-agree"),
            pytest.param([[0, 0, 0, 0], [1, 2, 3, 1]], [0, 0], [0, 0], id="all-zero"),
            pytest.param([[3, 3, 3]], [1], [1], id="capped-by-video"),
            pytest.param([[1, 1, 2, 2]], [3], [1], id="tie-goes-low"),
            pytest.param([[3, 2, 1, 1]], [2], [1], id="tie-after-capping"),
            pytest.param([[3, 3, 2, 0, 0]], [2], [2], id="capping-changes-winner"),
            pytest.param([[0, 1, 2]], [3], [0], id="three-way-tie"),
            pytest.param([[1, 2, 2], [0, 0, 3], [3, 3, 2]], [2, 1, 3], [2, 0, 3], id="several-frames"),
            pytest.param([[3, 2, 3, 2]], [1], [1], id="every-rating-capped"),
            pytest.param([[0, 3]], [2], [0], id="two-raters-split"),
        ],
    )
    def test_hand_worked_tables(self, ratings: list[list[int]], videos: list[int], expected: list[int]):
        assert consensus_labels(RatingTable(np.array(ratings)), videos) == expected

    def test_exceeding_fraction(self):
        assert exceeding_fraction([0, 2, 3, 1], [1, 1, 3, 0]) == 0.5
        with pytest.raises(MetricError):
            exceeding_fraction([], [])


def sample_report() -> MetricsReport:
    return MetricsReport(
        seed=5,
        config_text="seed = 5\n",
        video={"convert": FoldSummary.from_values([0.5, 0.7]), "sum": FoldSummary.from_values([0.6, 0.65])},
        auc={"gt0": FoldSummary.from_values([0.9, 0.95])},
        frame={"sum": FoldSummary.from_values([0.4])},
        confusion={"convert": ConfusionMatrix.from_labels([0, 1, 2, 3], [0, 1, 3, 3])},
        qc={"frames_removed": 3, "mean_decrease_pct": 12.5},
    )


class TestReport:
    def test_round_trip(self, tmp_path: Path):
        path = tmp_path / "reports" / "report.toml"
        save_report(sample_report(), path)
        doc = load_report(path)
        assert doc["provenance"]["seed"] == 5
        assert doc["provenance"]["config"] == "seed = 5\n"
        assert doc["video"]["convert"]["values"] == [0.5, 0.7]
        assert doc["confusion"]["convert"]["matrix"][2] == [0, 0, 0, 1]
        assert doc["qc"]["frames_removed"] == 3
        assert "raters" not in doc
        assert (tmp_path / "reports" / "confusion_convert.csv").exists()

    def test_single_fold_summary_has_zero_width(self):
        summary = FoldSummary.from_values([0.4])
        assert (summary.mean, summary.lower, summary.upper) == (0.4, 0.4, 0.4)
        with pytest.raises(MetricError):
            FoldSummary.from_values([])

    def test_saved_report_is_deterministic(self, tmp_path: Path):
        save_report(sample_report(), tmp_path / "a.toml")
        save_report(sample_report(), tmp_path / "b.toml")
        assert (tmp_path / "a.toml").read_bytes() == (tmp_path / "b.toml").read_bytes()

    def _valid_doc(self, tmp_path: Path) -> dict:
        save_report(sample_report(), tmp_path / "report.toml")
        return load_report(tmp_path / "report.toml")

    def test_rejects_wrong_schema(self, tmp_path: Path):
        doc = self._valid_doc(tmp_path)
        doc["schema_version"] = 2
        with pytest.raises(MetricError, match="schema_version"):
            validate_report(doc)

    def test_rejects_interval_out_of_order(self, tmp_path: Path):
        doc = self._valid_doc(tmp_path)
        doc["video"]["convert"]["lower"] = 0.9
        with pytest.raises(MetricError, match="out of order"):
            validate_report(doc)

    def test_rejects_missing_video_and_bad_matrix(self, tmp_path: Path):
        doc = self._valid_doc(tmp_path)
        doc["confusion"]["convert"]["matrix"] = [[1, 2, 3]]
        with pytest.raises(MetricError, match="confusion"):
            validate_report(doc)
        doc["video"] = {}
        with pytest.raises(MetricError, match="no video"):
            validate_report(doc)

    def test_rejects_invalid_toml(self, tmp_path: Path):
        (tmp_path / "r.toml").write_text("not = [toml", encoding="utf-8")
        with pytest.raises(MetricError, match="not valid TOML"):
            load_report(tmp_path / "r.toml")
