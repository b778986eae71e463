"""Task reductions, the two logistic fitters, CV, and the estimator."""

import numpy as np
import pytest

from fmax.errors import DimensionError, DomainError
from fmax.estimate import (
    ClassificationTask,
    TrainedEstimator,
    binary_value_grad,
    combine_chain_rule,
    fit_binary,
    fit_estimator,
    fit_multinomial,
    fold_assignment,
    estimate_p_matrix,
    multinomial_value_grad,
    reduce_to_count_task,
    reduce_to_label_task,
    select_lambda,
)
from fmax.factor import LabelPartition
from fmax.rng import stream
from fmax.synth import Dataset, ancestral_sample, sample_cpts, scenario_structure


def _toy_dataset(rng, n=200, n_features=4, n_labels=3):
    features = (rng.random((n, n_features)) < 0.5).astype(np.uint8)
    labels = (rng.random((n, n_labels)) < 0.4).astype(np.uint8)
    return Dataset(features, labels)


def _central_diff(vg, w, eps=1e-6):
    grad = np.empty_like(w)
    for j in range(w.size):
        up = w.copy()
        dn = w.copy()
        up[j] += eps
        dn[j] -= eps
        grad[j] = (vg(up)[0] - vg(dn)[0]) / (2 * eps)
    return grad


class TestTaskReductions:
    def test_count_task(self):
        data = _toy_dataset(stream(80))
        task = reduce_to_count_task(data, (0, 2))
        assert task.n_classes == 3
        assert np.array_equal(task.y, data.labels[:, [0, 2]].sum(axis=1))
        assert np.array_equal(task.x, data.features.astype(np.float64))

    def test_label_task_numeric_appends_count_column(self):
        data = _toy_dataset(stream(81))
        task = reduce_to_label_task(data, (0, 1, 2), 1)
        assert task.x.shape[1] == data.features.shape[1] + 1
        assert np.array_equal(task.x[:, -1], data.labels.sum(axis=1))
        assert np.array_equal(task.y, data.labels[:, 1])

    def test_label_task_onehot(self):
        data = _toy_dataset(stream(82))
        task = reduce_to_label_task(data, (0, 1), 0, s_encoding="onehot")
        onehot = task.x[:, -3:]
        assert np.array_equal(onehot.sum(axis=1), np.ones(data.n))
        counts = data.labels[:, :2].sum(axis=1)
        assert np.array_equal(np.argmax(onehot, axis=1), counts)

    def test_rejects_label_outside_block(self):
        data = _toy_dataset(stream(83))
        with pytest.raises(DomainError):
            reduce_to_label_task(data, (0, 1), 2)


class TestGradients:
    @pytest.mark.parametrize("lam", [0.0, 0.3])
    def test_binary_matches_central_differences(self, lam):
        rng = stream(84)
        task = ClassificationTask(
            rng.normal(size=(30, 4)), (rng.random(30) < 0.5).astype(int), 2
        )
        vg, dim = binary_value_grad(task, lam)
        for _ in range(3):
            w = rng.normal(size=dim)
            _, grad = vg(w)
            fd = _central_diff(vg, w)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom < 1e-6

    @pytest.mark.parametrize("lam", [0.0, 0.3])
    def test_multinomial_matches_central_differences(self, lam):
        rng = stream(85)
        task = ClassificationTask(
            rng.normal(size=(30, 3)), rng.integers(0, 4, size=30), 4
        )
        vg, dim = multinomial_value_grad(task, lam)
        for _ in range(3):
            w = rng.normal(size=dim)
            _, grad = vg(w)
            fd = _central_diff(vg, w)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom < 1e-6

    def test_intercept_is_not_penalized(self):
        rng = stream(86)
        task = ClassificationTask(
            rng.normal(size=(20, 2)), (rng.random(20) < 0.5).astype(int), 2
        )
        vg, dim = binary_value_grad(task, 1000.0)
        w = np.array([0.5, -0.5, 2.0])
        val_big_intercept, _ = vg(w)
        w2 = np.array([0.5, -0.5, 3.0])
        val_bigger, _ = vg(w2)
        # Penalty contributes identically; only data terms differ.
        vg0, _ = binary_value_grad(task, 0.0)
        assert val_bigger - val_big_intercept == pytest.approx(
            vg0(w2)[0] - vg0(w)[0], abs=1e-12
        )


class TestFitters:
    def test_objective_history_is_monotone(self):
        rng = stream(87)
        task = ClassificationTask(
            rng.normal(size=(100, 5)), (rng.random(100) < 0.5).astype(int), 2
        )
        _, info = fit_binary(task, 0.01)
        hist = info["objective_history"]
        assert all(b <= a + 1e-15 for a, b in zip(hist, hist[1:]))

    def test_binary_recovers_planted_weights(self):
        rng = stream(88)
        x = rng.normal(size=(6000, 3))
        w_true = np.array([1.5, -2.0, 0.5])
        z = x @ w_true + 0.3
        y = (rng.random(6000) < 1.0 / (1.0 + np.exp(-z))).astype(int)
        model, info = fit_binary(ClassificationTask(x, y, 2), 1e-4)
        assert info["grad_norm"] <= 1e-6
        assert np.abs(model.weights[:3] - w_true).max() < 0.15
        assert abs(model.weights[-1] - 0.3) < 0.15

    def test_multinomial_probabilities_sum_to_one(self):
        rng = stream(89)
        task = ClassificationTask(
            rng.normal(size=(200, 3)), rng.integers(0, 3, size=200), 3
        )
        model, _ = fit_multinomial(task, 0.1)
        probs = model.predict_proba(rng.normal(size=(50, 3)))
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert (probs > 0).all()

    def test_large_lambda_shrinks_features_not_intercept(self):
        rng = stream(90)
        x = rng.normal(size=(500, 3))
        y = (rng.random(500) < 0.8).astype(int)  # strong base rate
        model, _ = fit_binary(ClassificationTask(x, y, 2), 1e4)
        assert np.abs(model.weights[:3]).max() < 1e-3
        assert model.weights[-1] > 1.0  # logit of 0.8 is about 1.39

    def test_deterministic_given_inputs(self):
        rng = stream(91)
        task = ClassificationTask(
            rng.normal(size=(80, 4)), (rng.random(80) < 0.5).astype(int), 2
        )
        a, _ = fit_binary(task, 0.01)
        b, _ = fit_binary(task, 0.01)
        assert np.array_equal(a.weights, b.weights)


class TestSelectLambda:
    def test_prefers_regularization_on_noise(self):
        # Pure noise: the held-out NLL is minimized by heavy shrinkage.
        rng = stream(92)
        x = rng.normal(size=(60, 10))
        y = (rng.random(60) < 0.5).astype(int)
        task = ClassificationTask(x, y, 2)
        lam = select_lambda(task, (0.001, 10.0), folds=3, rng=stream(93))
        assert lam == 10.0

    def test_single_entry_short_circuit(self):
        rng = stream(94)
        task = ClassificationTask(
            rng.normal(size=(30, 2)), (rng.random(30) < 0.5).astype(int), 2
        )
        assert select_lambda(task, (0.25,), folds=3, rng=stream(95)) == 0.25

    def test_requires_rng(self):
        rng = stream(96)
        task = ClassificationTask(
            rng.normal(size=(30, 2)), (rng.random(30) < 0.5).astype(int), 2
        )
        with pytest.raises(DomainError):
            select_lambda(task, (0.1, 1.0), folds=3, rng=None)

    def test_fold_assignment_is_balanced(self):
        folds = fold_assignment(100, 3, stream(97))
        counts = np.bincount(folds)
        assert counts.max() - counts.min() <= 1
        assert set(folds) == {0, 1, 2}


class TestChainRule:
    def test_drops_s_zero_column(self):
        count_probs = np.array([[0.2, 0.5, 0.3]])
        label_probs = np.array([[[0.9, 0.4], [0.1, 0.6]]])
        p = combine_chain_rule(count_probs, label_probs)
        assert p.shape == (1, 2, 2)
        assert np.allclose(p[0], [[0.45, 0.12], [0.05, 0.18]])


@pytest.fixture(scope="module")
def fitted():
    skeleton, partition = scenario_structure(1)
    bn = sample_cpts(skeleton, stream(20, 0))
    train = ancestral_sample(bn, 1500, stream(20, 1))
    est = fit_estimator(train, partition, lambda_grid=(0.01, 1.0), rng=stream(20, 2))
    return bn, partition, est


class TestTrainedEstimator:

    def test_count_model_is_calibrated_on_average(self, fitted):
        # With an unpenalized intercept, the fitted mean of p(s | x)
        # over the training rows matches the empirical s frequencies
        # regardless of model misspecification (MLE stationarity).
        bn, partition, est = fitted
        train = ancestral_sample(bn, 1500, stream(20, 1))
        for k, block in enumerate(partition.blocks):
            counts = train.labels[:, list(block)].sum(axis=1)
            empirical = np.bincount(counts, minlength=len(block) + 1) / train.n
            fitted_mean = est.blocks[k].count_model.predict_proba(
                train.features.astype(np.float64)
            ).mean(axis=0)
            assert np.abs(fitted_mean - empirical).max() < 0.02

    def test_recovers_realizable_truth_with_singletons(self):
        # Independent logistic labels: the two-step reduction is well
        # specified under a singleton partition, so the estimated
        # p(y_i = 1, s = 1) curves converge to the truth.
        rng = stream(23)
        n = 4000
        x = (rng.random((n, 3)) < 0.5).astype(np.uint8)
        w = np.array([1.2, -0.8, 0.4])
        rate = 1.0 / (1.0 + np.exp(-(x @ w - 0.3)))
        y = (rng.random(n) < rate).astype(np.uint8)
        data = Dataset(x, y[:, None])
        est = fit_estimator(
            data, LabelPartition.singletons(1), lambda_grid=(0.001,), rng=stream(24)
        )
        grid = np.array(
            [[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)],
            dtype=np.float64,
        )
        truth = 1.0 / (1.0 + np.exp(-(grid @ w - 0.3)))
        estimated = np.array(
            [estimate_p_matrix(est, 0, grid[r])[0, 0] for r in range(8)]
        )
        assert np.abs(estimated - truth).max() < 0.06

    def test_predict_shape_and_determinism(self, fitted):
        bn, _, est = fitted
        test = ancestral_sample(bn, 100, stream(20, 4))
        h1 = est.predict(test.features)
        h2, stats = est.predict(test.features, return_stats=True)
        assert h1.shape == (100, 8)
        assert np.array_equal(h1, h2)
        assert stats["expected_f"].shape == (100,)
        assert stats["n_inconsistent"] >= 0

    def test_json_round_trip_preserves_predictions(self, fitted):
        bn, _, est = fitted
        test = ancestral_sample(bn, 50, stream(20, 5))
        clone = TrainedEstimator.from_json(est.to_json())
        assert np.array_equal(clone.predict(test.features), est.predict(test.features))
        for k in range(est.partition.n_blocks):
            assert np.array_equal(
                clone.p_matrices(k, test.features), est.p_matrices(k, test.features)
            )

    def test_rejects_wrong_feature_count(self, fitted):
        _, _, est = fitted
        with pytest.raises(DimensionError):
            est.predict(np.zeros((3, 9)))

    def test_refit_is_deterministic(self):
        skeleton, partition = scenario_structure(1)
        bn = sample_cpts(skeleton, stream(21, 0))
        train = ancestral_sample(bn, 300, stream(21, 1))
        a = fit_estimator(train, partition, lambda_grid=(0.1, 1.0), rng=stream(21, 2))
        b = fit_estimator(train, partition, lambda_grid=(0.1, 1.0), rng=stream(21, 2))
        for ba, bb in zip(a.blocks, b.blocks):
            assert np.array_equal(ba.count_model.weights, bb.count_model.weights)
            for la, lb in zip(ba.label_models, bb.label_models):
                assert np.array_equal(la.weights, lb.weights)

    def test_direct_method_also_predicts(self):
        skeleton, partition = scenario_structure(1)
        bn = sample_cpts(skeleton, stream(22, 0))
        train = ancestral_sample(bn, 400, stream(22, 1))
        est = fit_estimator(
            train, partition, lambda_grid=(0.1,), rng=stream(22, 2), method="direct"
        )
        test = ancestral_sample(bn, 30, stream(22, 3))
        h = est.predict(test.features)
        assert h.shape == (30, 8)
