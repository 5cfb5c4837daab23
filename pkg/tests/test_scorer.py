from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from ordmil.scorer import (
    AdamState,
    Gradients,
    Head,
    LossKind,
    ScorerError,
    ScorerModel,
    adam_step,
    backward,
    backward_batch,
    clip_score,
    forward,
    forward_batch,
    gradient_check,
    load_model,
    loss_and_grad,
    loss_regime,
    save_model,
)

if TYPE_CHECKING:
    from pathlib import Path


def small_model(head: Head = Head.SIGMOID, seed: int = 0) -> ScorerModel:
    return ScorerModel.init((4, 5, 3, 1), head, seed)


class TestForward:
    def test_zero_models(self, rng: np.random.Generator):
        frame = rng.standard_normal(4)
        assert forward(ScorerModel.zeros((4, 3, 1), Head.SIGMOID), frame) == 0.5
        assert forward(ScorerModel.zeros((4, 3, 1), Head.LINEAR), frame) == 0.0

    def test_sigmoid_range(self, rng: np.random.Generator):
        scores = forward_batch(small_model(), 50 * rng.standard_normal((100, 4)))
        assert np.all((scores >= 0) & (scores <= 1))

    @pytest.mark.parametrize("logit", [37.0, 40.0, 800.0, -40.0, -800.0])
    def test_saturated_logits_stay_inside(self, logit: float, rng: np.random.Generator):
        model = ScorerModel.zeros((4, 3, 1), Head.SIGMOID)
        model.biases[-1][:] = logit
        frame = rng.standard_normal(4)
        p = forward(model, frame)
        assert 0.0 < p < 1.0
        for target in (0.0, 1.0):
            loss, _ = loss_and_grad(LossKind.BCE, p, target)
            assert math.isfinite(loss)
            assert gradient_check(model, frame, LossKind.BCE, target) < 1e-4

    def test_batch_matches_single(self, rng: np.random.Generator):
        model = small_model(Head.LINEAR)
        frames = rng.standard_normal((6, 4))
        np.testing.assert_allclose(forward_batch(model, frames), [forward(model, f) for f in frames])

    def test_deterministic(self, rng: np.random.Generator):
        frame = rng.standard_normal(4)
        assert forward(small_model(seed=3), frame) == forward(small_model(seed=3), frame)
        assert small_model(seed=3) == small_model(seed=3)
        assert small_model(seed=3) != small_model(seed=4)

    def test_dimension_mismatch(self):
        with pytest.raises(ScorerError, match="input dimension"):
            forward(small_model(), np.zeros(5))

    def test_invalid_layers(self):
        with pytest.raises(ScorerError):
            ScorerModel.zeros((4, 2), Head.SIGMOID)
        with pytest.raises(ScorerError, match="non-finite"):
            ScorerModel((1, 1), [np.array([[np.inf]])], [np.zeros(1)], Head.LINEAR)


class TestLosses:
    def test_bce_half(self):
        loss, _ = loss_and_grad(LossKind.BCE, 0.5, 1.0)
        assert loss == pytest.approx(math.log(2))

    def test_mae(self):
        assert loss_and_grad(LossKind.MAE, 2.5, 3.0) == (0.5, -1.0)

    def test_log_cosh_at_target(self):
        loss, grad = loss_and_grad(LossKind.LOG_COSH, 1.7, 1.7)
        assert loss == pytest.approx(0.0, abs=1e-15)
        assert grad == 0.0

    def test_log_cosh_stable_for_large_arguments(self):
        loss, grad = loss_and_grad(LossKind.LOG_COSH, 1000.0, 0.0)
        assert loss == pytest.approx(1000.0 - math.log(2))
        assert grad == pytest.approx(1.0)

    def test_mse_and_smooth_l1(self):
        assert loss_and_grad(LossKind.MSE, 1.0, 3.0) == (4.0, -4.0)
        assert loss_and_grad(LossKind.SMOOTH_L1, 0.5, 0.0) == (0.125, 0.5)
        assert loss_and_grad(LossKind.SMOOTH_L1, 3.0, 0.0) == (2.5, 1.0)

    def test_array_inputs(self):
        loss, grad = loss_and_grad(LossKind.MAE, np.array([0.0, 2.0]), np.array([1.0, 1.0]))
        np.testing.assert_array_equal(loss, [1.0, 1.0])
        np.testing.assert_array_equal(grad, [-1.0, 1.0])

    @pytest.mark.parametrize("pred", [0.0, 1.0, 1.5])
    def test_bce_rejects_out_of_range(self, pred: float):
        with pytest.raises(ScorerError):
            loss_and_grad(LossKind.BCE, pred, 1.0)

    def test_bce_monotone(self):
        preds = np.linspace(0.01, 0.99, 50)
        positive, _ = loss_and_grad(LossKind.BCE, preds, 1.0)
        negative, _ = loss_and_grad(LossKind.BCE, preds, 0.0)
        assert np.all(np.diff(positive) < 0)
        assert np.all(np.diff(negative) > 0)

    @pytest.mark.parametrize("kind", list(LossKind))
    def test_nonnegative(self, kind: LossKind, rng: np.random.Generator):
        preds = rng.uniform(0.01, 0.99, 20)
        targets = rng.integers(0, 2, 20).astype(float)
        loss, _ = loss_and_grad(kind, preds, targets)
        assert np.all(loss >= 0)

    def test_regime_changes_across_kink(self):
        assert loss_regime(LossKind.SMOOTH_L1, 0.5, 0.0) != loss_regime(LossKind.SMOOTH_L1, 1.5, 0.0)
        assert loss_regime(LossKind.MAE, 0.5, 1.0) != loss_regime(LossKind.MAE, 1.5, 1.0)
        assert loss_regime(LossKind.MSE, 0.5, 1.0) == loss_regime(LossKind.MSE, 9.0, 1.0)


class TestClipScore:
    @pytest.mark.parametrize(("score", "expected"), [(3.4, 3.0), (-0.2, 0.0), (1.5, 1.5)])
    def test_examples(self, score: float, expected: float):
        assert clip_score(score) == expected

    def test_rejects_non_finite(self):
        with pytest.raises(ScorerError):
            clip_score(math.nan)


class TestBackward:
    def test_zero_upstream(self, rng: np.random.Generator):
        grads = backward(small_model(), rng.standard_normal(4), 0.0)
        assert not np.any(grads.flat())

    def test_linear_in_upstream(self, rng: np.random.Generator):
        model, frame = small_model(), rng.standard_normal(4)
        np.testing.assert_allclose(backward(model, frame, 2 * 0.37).flat(), 2 * backward(model, frame, 0.37).flat())

    def test_batch_sums_frames(self, rng: np.random.Generator):
        model, frames = small_model(Head.LINEAR), rng.standard_normal((3, 4))
        total = sum(backward(model, f, 1.0).flat() for f in frames)
        np.testing.assert_allclose(backward_batch(model, frames, np.ones(3)).flat(), total)

    def test_upstream_length_checked(self, rng: np.random.Generator):
        with pytest.raises(ScorerError):
            backward_batch(small_model(), rng.standard_normal((3, 4)), np.ones(2))


class TestGradientCheck:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bce(self, seed: int, rng: np.random.Generator):
        model = small_model(Head.SIGMOID, seed)
        assert gradient_check(model, rng.standard_normal(4), LossKind.BCE, 1.0) < 1e-4

    @pytest.mark.parametrize("kind", [LossKind.MAE, LossKind.MSE, LossKind.SMOOTH_L1, LossKind.LOG_COSH])
    def test_regression_losses(self, kind: LossKind, rng: np.random.Generator):
        model = small_model(Head.LINEAR, 5)
        frame = rng.standard_normal(4)
        assert forward(model, frame) != 3.0
        assert gradient_check(model, frame, kind, 3.0) < 1e-4

    def test_smooth_l1_kink_is_excluded(self):
        # Zero model predicts exactly 0, which sits on the smooth L1 boundary for target 1
        model = ScorerModel.zeros((2, 3, 1), Head.LINEAR)
        assert gradient_check(model, np.array([0.3, -0.8]), LossKind.SMOOTH_L1, 1.0) < 1e-4

    def test_rejects_large_models(self):
        model = ScorerModel.init((100, 100, 1), Head.LINEAR, 0)
        with pytest.raises(ScorerError, match="fewer than"):
            gradient_check(model, np.zeros(100), LossKind.MSE, 0.0)


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        model = small_model()
        before = model.copy()
        zeros = Gradients([np.zeros_like(w) for w in model.weights], [np.zeros_like(b) for b in model.biases])
        state = AdamState.for_model(model, weight_decay=0.0)
        for _ in range(3):
            adam_step(model, zeros, state)
        assert model == before
        assert state.step == 3

    def test_first_step_opposes_gradient(self, rng: np.random.Generator):
        model = small_model()
        before = model.copy()
        grads = backward(model, rng.standard_normal(4), 1.0)
        adam_step(model, grads, AdamState.for_model(model, lr=1e-3, weight_decay=0.0))
        delta = np.concatenate([(a - b).ravel() for a, b in zip(model.parameters(), before.parameters(), strict=True)])
        g = grads.flat()
        moved = np.abs(g) > 1e-8
        assert np.all(np.sign(delta[moved]) == -np.sign(g[moved]))

    def test_replay_deterministic(self, rng: np.random.Generator):
        frames = rng.standard_normal((10, 4))
        a, b = small_model(), small_model()
        state_a, state_b = AdamState.for_model(a), AdamState.for_model(b)
        for frame in frames:
            adam_step(a, backward(a, frame, 0.5), state_a)
            adam_step(b, backward(b, frame, 0.5), state_b)
        assert a == b

    def test_shape_mismatch(self):
        model = small_model()
        other = ScorerModel.zeros((4, 2, 1), Head.SIGMOID)
        grads = Gradients(other.weights, other.biases)
        with pytest.raises(ScorerError, match="shapes"):
            adam_step(model, grads, AdamState.for_model(model))


class TestStorage:
    def test_round_trip(self, tmp_path: Path):
        model = small_model(Head.LINEAR, 8)
        save_model(model, tmp_path / "m.json", config_sha256="x")
        assert load_model(tmp_path / "m.json") == model

    def test_rejects_other_files(self, tmp_path: Path):
        path = tmp_path / "m.json"
        path.write_text('{"format": "something-else"}', encoding="utf-8")
        with pytest.raises(ScorerError):
            load_model(path)
        path.write_text("not json", encoding="utf-8")
        with pytest.raises(ScorerError, match="not valid JSON"):
            load_model(path)
