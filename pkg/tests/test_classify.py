import numpy as np
import pytest

from poseexpr.classify import (
    ConfusionMatrix,
    ExpressionLabel,
    LabeledSample,
    TrainConfig,
    balance,
    class_weight_vector,
    confusion_accuracy,
    evaluate,
    linear_objective,
    load_model,
    mine_hard_examples,
    predict,
    save_model,
    scores_of,
    train_forest,
    train_linear,
)
from poseexpr.errors import (
    DimensionMismatch,
    EmptyClass,
    EmptyMatrix,
    SingleClassData,
)


def blob_samples(rng, n_per_class=30, classes=(0, 1, 2), dim=5, spread=0.3):
    """Well-separated Gaussian blobs, one per class."""
    samples = []
    for c in classes:
        mean = np.zeros(dim)
        mean[c % dim] = 4.0
        mean[(c + 1) % dim] = -2.0 * c
        for _ in range(n_per_class):
            samples.append(LabeledSample(
                rng.normal(mean, spread), ExpressionLabel(c)
            ))
    return samples


class TestLinear:
    def test_separable_blobs_learned(self):
        rng = np.random.default_rng(0)
        samples = blob_samples(rng)
        model = train_linear(samples, TrainConfig(epochs=20))
        correct = sum(predict(model, s.feature)[0] == s.label for s in samples)
        assert correct / len(samples) >= 0.97

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(1)
        samples = blob_samples(rng)
        m1 = train_linear(samples, TrainConfig(epochs=5, seed=3))
        m2 = train_linear(samples, TrainConfig(epochs=5, seed=3))
        np.testing.assert_array_equal(m1.weights, m2.weights)
        np.testing.assert_array_equal(m1.bias, m2.bias)

    def test_objective_decreases_with_training(self):
        rng = np.random.default_rng(2)
        samples = blob_samples(rng)
        short = train_linear(samples, TrainConfig(epochs=1))
        long = train_linear(samples, TrainConfig(epochs=30))
        assert linear_objective(long, samples) < linear_objective(short, samples)

    def test_class_weights_shift_decisions(self):
        # heavy imbalance: with weights the minority class must be
        # predicted at least as often
        rng = np.random.default_rng(3)
        samples = blob_samples(rng, n_per_class=4, classes=(0,), spread=1.5)
        samples += blob_samples(rng, n_per_class=60, classes=(1,), spread=1.5)
        cw = class_weight_vector(samples)
        plain = train_linear(samples, TrainConfig(epochs=10))
        weighted = train_linear(samples, TrainConfig(epochs=10, class_weights=cw))
        minority_hits = lambda m: sum(
            predict(m, s.feature)[0] == ExpressionLabel(0)
            for s in samples if s.label == ExpressionLabel(0)
        )
        assert minority_hits(weighted) >= minority_hits(plain)

    def test_single_class_rejected(self):
        rng = np.random.default_rng(4)
        with pytest.raises(SingleClassData):
            train_linear(blob_samples(rng, classes=(2,)))

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(5)
        model = train_linear(blob_samples(rng), TrainConfig(epochs=2))
        with pytest.raises(DimensionMismatch):
            scores_of(model, np.zeros(9))


class TestForest:
    def test_separable_blobs_learned(self):
        rng = np.random.default_rng(6)
        samples = blob_samples(rng)
        model = train_forest(samples, TrainConfig(n_trees=15, seed=1))
        correct = sum(predict(model, s.feature)[0] == s.label for s in samples)
        assert correct / len(samples) >= 0.97

    def test_oob_accuracy_reported(self):
        rng = np.random.default_rng(7)
        model = train_forest(blob_samples(rng), TrainConfig(n_trees=15, seed=2))
        assert 0.0 <= model.oob_accuracy <= 1.0
        assert model.oob_accuracy >= 0.8  # easy data

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(8)
        samples = blob_samples(rng, n_per_class=15)
        m1 = train_forest(samples, TrainConfig(n_trees=5, seed=9))
        m2 = train_forest(samples, TrainConfig(n_trees=5, seed=9))
        for t1, t2 in zip(m1.trees, m2.trees):
            np.testing.assert_array_equal(t1["feature"], t2["feature"])
            np.testing.assert_array_equal(t1["threshold"], t2["threshold"])

    def test_max_depth_respected(self):
        rng = np.random.default_rng(9)
        samples = blob_samples(rng, spread=2.0)
        model = train_forest(samples, TrainConfig(n_trees=5, max_depth=2, seed=0))
        for tree in model.trees:
            # preorder node array of a depth-2 tree: at most 1 + 2 + 4 nodes
            assert len(tree["feature"]) <= 7


class TestBalancing:
    def imbalanced(self, rng):
        return (blob_samples(rng, n_per_class=40, classes=(0,))
                + blob_samples(rng, n_per_class=12, classes=(1,))
                + blob_samples(rng, n_per_class=7, classes=(2,)))

    def counts_of(self, samples):
        return np.bincount([int(s.label) for s in samples], minlength=7)

    def test_undersample_exact_equal_counts(self):
        rng = np.random.default_rng(10)
        out = balance(self.imbalanced(rng), "undersample", seed=0)
        counts = self.counts_of(out)
        np.testing.assert_array_equal(counts[:3], [7, 7, 7])

    def test_oversample_exact_equal_counts(self):
        rng = np.random.default_rng(11)
        out = balance(self.imbalanced(rng), "oversample", seed=0)
        counts = self.counts_of(out)
        np.testing.assert_array_equal(counts[:3], [40, 40, 40])

    def test_none_is_identity(self):
        rng = np.random.default_rng(12)
        samples = self.imbalanced(rng)
        assert balance(samples, "none") == samples
        assert balance(samples, "class_weights") == samples

    def test_undersample_draws_without_replacement(self):
        rng = np.random.default_rng(13)
        out = balance(self.imbalanced(rng), "undersample", seed=1)
        ids = [id(s) for s in out]
        assert len(ids) == len(set(ids))

    def test_unknown_strategy(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError):
            balance(self.imbalanced(rng), "smote")

    def test_empty_input_undersample(self):
        with pytest.raises(EmptyClass):
            balance([], "undersample")

    def test_class_weight_vector(self):
        rng = np.random.default_rng(15)
        samples = self.imbalanced(rng)
        cw = class_weight_vector(samples)
        assert cw[0] == pytest.approx(1.0)
        assert cw[1] == pytest.approx(40 / 12)
        assert cw[2] == pytest.approx(40 / 7)
        assert cw[3] == 0.0  # absent class


class TestHardMining:
    def test_band_zero_keeps_only_misclassified(self):
        rng = np.random.default_rng(16)
        samples = blob_samples(rng, spread=2.5)
        model = train_linear(samples, TrainConfig(epochs=5))
        hard = mine_hard_examples(model, samples, band=0.0)
        wrong = [s for s in samples if predict(model, s.feature)[0] != s.label]
        assert hard == wrong

    def test_band_adds_low_margin_correct(self):
        rng = np.random.default_rng(17)
        samples = blob_samples(rng, spread=2.5)
        model = train_linear(samples, TrainConfig(epochs=5))
        hard0 = mine_hard_examples(model, samples, band=0.0)
        hard_big = mine_hard_examples(model, samples, band=1e9)
        assert set(map(id, hard0)) <= set(map(id, hard_big))
        assert hard_big == samples  # everything has finite margin


class TestEvaluation:
    def test_confusion_counts(self):
        rng = np.random.default_rng(18)
        samples = blob_samples(rng)
        model = train_linear(samples, TrainConfig(epochs=20))
        cm = evaluate(model, samples)
        assert cm.total == len(samples)
        row_sums = cm.counts.sum(axis=1)
        np.testing.assert_array_equal(row_sums[:3], [30, 30, 30])

    def test_accuracy_is_trace_over_total(self):
        counts = np.zeros((7, 7), dtype=np.int64)
        counts[0, 0], counts[1, 1], counts[1, 0] = 8, 4, 4
        assert confusion_accuracy(ConfusionMatrix(counts)) == pytest.approx(12 / 16)

    def test_empty_matrix_raises(self):
        with pytest.raises(EmptyMatrix):
            confusion_accuracy(ConfusionMatrix(np.zeros((7, 7), dtype=np.int64)))

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))


class TestModelIo:
    def test_linear_round_trip(self, tmp_path):
        rng = np.random.default_rng(19)
        samples = blob_samples(rng)
        model = train_linear(samples, TrainConfig(epochs=3))
        path = tmp_path / "linear.pxmd"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        np.testing.assert_array_equal(loaded.bias, model.bias)

    def test_forest_round_trip(self, tmp_path):
        rng = np.random.default_rng(20)
        samples = blob_samples(rng, n_per_class=15)
        model = train_forest(samples, TrainConfig(n_trees=4, seed=5))
        path = tmp_path / "forest.pxmd"
        save_model(model, path)
        loaded = load_model(path)
        assert len(loaded.trees) == 4
        for s in samples[:10]:
            assert predict(loaded, s.feature)[0] == predict(model, s.feature)[0]
            np.testing.assert_allclose(
                scores_of(loaded, s.feature), scores_of(model, s.feature)
            )
