import math

import numpy as np
import pytest

from grainfuse.ensemble import (
    PERFECT_ERROR,
    BoostedClassifier,
    BoostedRegressor,
    BoostLoss,
    Forest,
    ForestParams,
    bootstrap_sample,
    fit_adaboost_classifier,
    fit_adaboost_r2,
    fit_extra_trees,
    fit_random_forest,
    learner_weight,
    normalizer,
    predict_forest,
)
from grainfuse.exceptions import DimensionMismatch, InvalidParameter
from grainfuse.helpers import make_rng
from grainfuse.metrics import mse
from grainfuse.serialization import model_to_dict
from grainfuse.tree import TreeParams, WeightedStump, fit_tree


@pytest.fixture
def six_points(make_dataset):
    return make_dataset(np.arange(6.0), [1.0, 1.0, -1.0, 1.0, -1.0, -1.0])


class TestAdaBoostHandTrace:
    @pytest.fixture
    def boosted(self, six_points):
        return fit_adaboost_classifier(six_points, rounds=3)

    def test_learners(self, boosted):
        assert boosted.state.learners == (
            WeightedStump(0, 1.5, 1),
            WeightedStump(0, 3.5, 1),
            WeightedStump(0, 2.5, -1),
        )

    def test_errors(self, boosted):
        np.testing.assert_allclose(boosted.state.errors, [1 / 6, 0.1, 2 / 9], atol=1e-9)

    def test_learner_weights(self, boosted):
        expected = [0.5 * math.log(5.0), math.log(3.0), 0.5 * math.log(3.5)]
        np.testing.assert_allclose(boosted.state.alphas, expected, atol=1e-9)

    def test_normalizers(self, boosted):
        expected = [math.sqrt(5.0) / 3.0, 0.6, 2.0 * math.sqrt(14.0) / 9.0]
        np.testing.assert_allclose(boosted.state.normalizers, expected, atol=1e-9)

    def test_distributions(self, boosted):
        history = boosted.state.history
        assert len(history) == 4
        np.testing.assert_allclose(history[0], np.full(6, 1 / 6), atol=1e-12)
        np.testing.assert_allclose(history[1], [0.1, 0.1, 0.1, 0.5, 0.1, 0.1], atol=1e-9)
        np.testing.assert_allclose(history[2], np.array([1, 1, 9, 5, 1, 1]) / 18, atol=1e-9)

    def test_distributions_are_normalized(self, boosted):
        for weights in boosted.state.history:
            assert weights.sum() == pytest.approx(1.0, abs=1e-12)
            assert (weights > 0).all()

    def test_last_learner_has_error_one_half_under_next_distribution(self, boosted, six_points):
        labels = six_points.targets
        for t, learner in enumerate(boosted.state.learners):
            wrong = learner.predict(six_points.features) != labels
            assert boosted.state.history[t + 1][wrong].sum() == pytest.approx(0.5, abs=1e-9)

    def test_normalizer_is_the_reweighting_sum(self, boosted, six_points):
        state = boosted.state
        for t, learner in enumerate(state.learners):
            margin = six_points.targets * learner.predict(six_points.features)
            unnormalized = state.history[t] * np.exp(-state.alphas[t] * margin)
            assert unnormalized.sum() == pytest.approx(state.normalizers[t], abs=1e-12)
            assert unnormalized.sum() == pytest.approx(normalizer(state.errors[t]), abs=1e-12)
            np.testing.assert_allclose(
                state.history[t + 1], unnormalized / state.normalizers[t], atol=1e-12
            )

    def test_training_error_bound(self, boosted, six_points):
        training_error = np.mean(boosted.predict(six_points.features) != six_points.targets)
        assert training_error == 0.0
        assert training_error <= np.prod(boosted.state.normalizers)


def test_adaboost_first_round_on_alternating_labels(make_dataset):
    data = make_dataset([0.0, 1.0, 2.0, 3.0], [1.0, -1.0, 1.0, -1.0])
    state = fit_adaboost_classifier(data, rounds=1).state
    assert state.errors[0] == pytest.approx(0.25, abs=1e-12)
    assert state.alphas[0] == pytest.approx(0.5 * math.log(3.0), abs=1e-9)
    assert state.normalizers[0] == pytest.approx(2.0 * math.sqrt(0.1875), abs=1e-9)


def test_normalizer_identity_on_random_labels(make_dataset):
    rng = np.random.default_rng(8)
    data = make_dataset(rng.normal(size=(40, 2)), rng.choice([-1.0, 1.0], size=40))
    state = fit_adaboost_classifier(data, rounds=10).state
    assert state.rounds_completed >= 1
    for t, learner in enumerate(state.learners):
        if state.errors[t] == 0.0:
            continue
        margin = data.targets * learner.predict(data.features)
        unnormalized = state.history[t] * np.exp(-state.alphas[t] * margin)
        expected = 2.0 * math.sqrt(state.errors[t] * (1.0 - state.errors[t]))
        assert unnormalized.sum() == pytest.approx(expected, abs=1e-12)


def test_adaboost_stops_on_perfect_stump(make_dataset):
    boosted = fit_adaboost_classifier(make_dataset([0.0, 1.0], [1.0, -1.0]), rounds=5)
    assert boosted.state.rounds_completed == 1
    assert boosted.state.alphas[0] == pytest.approx(learner_weight(PERFECT_ERROR))
    np.testing.assert_array_equal(boosted.predict([[0.0], [1.0]]), [1.0, -1.0])


def test_adaboost_sign_of_zero_is_positive():
    boosted = BoostedClassifier.from_dict(
        {
            "n_features": 1,
            "learners": [{"feature_index": 0, "threshold": 0.5, "polarity": 1}] * 2,
            "alphas": [1.0, -1.0],
            "normalizers": [1.0, 1.0],
            "errors": [0.1, 0.1],
            "history": [[0.5, 0.5]],
        }
    )
    assert boosted.predict([[0.0]])[0] == 1.0


@pytest.mark.parametrize("labels", [[0.0, 1.0], [2.0, -1.0]])
def test_adaboost_rejects_other_labels(make_dataset, labels):
    with pytest.raises(InvalidParameter):
        fit_adaboost_classifier(make_dataset([0.0, 1.0], labels), rounds=1)


def test_adaboost_needs_a_round(six_points):
    with pytest.raises(InvalidParameter):
        fit_adaboost_classifier(six_points, rounds=0)


def test_learner_weight_and_normalizer():
    assert learner_weight(0.25) == pytest.approx(0.5 * math.log(3.0))
    assert normalizer(0.5) == pytest.approx(1.0)


class TestForest:
    @pytest.fixture
    def params(self):
        return ForestParams(n_estimators=12, seed=5)

    @pytest.mark.parametrize("fit", [fit_random_forest, fit_extra_trees])
    def test_prediction_is_mean_of_trees(self, noisy_dataset, params, fit):
        forest = fit(noisy_dataset, params)
        rows = noisy_dataset.features[:10]
        expected = sum(tree.predict(rows) for tree in forest.trees) / len(forest.trees)
        np.testing.assert_array_equal(forest.predict(rows), expected)

    @pytest.mark.parametrize("fit", [fit_random_forest, fit_extra_trees])
    def test_prefix_equals_smaller_forest(self, noisy_dataset, params, fit):
        large = fit(noisy_dataset, params)
        small = fit(noisy_dataset, ForestParams(n_estimators=4, seed=5))
        assert large.truncate(4).to_dict() == small.to_dict()

    @pytest.mark.parametrize("fit", [fit_random_forest, fit_extra_trees])
    def test_parallel_equals_sequential(self, noisy_dataset, params, fit):
        sequential = fit(noisy_dataset, params, n_jobs=1)
        parallel = fit(noisy_dataset, params, n_jobs=2)
        assert model_to_dict(parallel) == model_to_dict(sequential)

    def test_single_tree_without_resampling_is_a_cart_tree(self, noisy_dataset):
        forest = fit_random_forest(noisy_dataset, ForestParams(1, bootstrap=False))
        assert forest.trees[0].to_dict() == fit_tree(noisy_dataset).to_dict()

    def test_many_trees(self, noisy_dataset):
        params = ForestParams(225, tree_params=TreeParams(max_depth=2), seed=1)
        forest = fit_random_forest(noisy_dataset.take(np.arange(20)), params)
        assert forest.n_estimators == len(forest.trees) == 225
        assert len(forest.per_tree_seeds) == 225

    def test_extra_trees_learn_a_noisy_sine(self, make_dataset):
        rng = np.random.default_rng(12)

        def sample(n):
            x = rng.uniform(0.0, 2.0 * math.pi, size=n)
            return make_dataset(x, np.sin(x) + rng.normal(0.0, 0.1, size=n))

        train, test = sample(200), sample(200)
        forest = fit_extra_trees(train, ForestParams(84, seed=0))
        assert forest.n_estimators == 84
        assert mse(test.targets, forest.predict(test.features)) < np.var(test.targets)

    def test_seed_matters(self, noisy_dataset):
        first = fit_random_forest(noisy_dataset, ForestParams(5, seed=0))
        second = fit_random_forest(noisy_dataset, ForestParams(5, seed=1))
        assert first.to_dict() != second.to_dict()

    def test_sampling_defaults(self, noisy_dataset, params):
        assert fit_random_forest(noisy_dataset, params).bootstrap
        extra = fit_extra_trees(noisy_dataset, params)
        assert extra.randomized and not extra.bootstrap
        assert extra.trees[0].n_samples == noisy_dataset.n

    def test_extra_tree_thresholds_inside_node_range(self, noisy_dataset, params):
        forest = fit_extra_trees(noisy_dataset, params)
        features = noisy_dataset.features
        for tree in forest.trees:
            stack = [(0, np.arange(noisy_dataset.n))]
            while stack:
                node, rows = stack.pop()
                if tree.is_leaf(node):
                    continue
                column = features[rows, tree.feature[node]]
                assert column.min() < tree.threshold[node] < column.max()
                go_left = column <= tree.threshold[node]
                stack.append((tree.left[node], rows[go_left]))
                stack.append((tree.right[node], rows[~go_left]))

    def test_per_tree_seeds(self, noisy_dataset, params):
        forest = fit_random_forest(noisy_dataset, params)
        assert forest.per_tree_seeds[3] == (5, 3)

    def test_predict_forest(self, noisy_dataset, params):
        forest = fit_random_forest(noisy_dataset, params)
        row = noisy_dataset.features[0]
        assert predict_forest(forest, row) == forest.predict(row[None, :])[0]
        with pytest.raises(DimensionMismatch):
            predict_forest(forest, row[:2])

    def test_dict_round_trip(self, noisy_dataset, params):
        forest = fit_extra_trees(noisy_dataset, params)
        copy = Forest.from_dict(forest.to_dict())
        np.testing.assert_array_equal(
            copy.predict(noisy_dataset.features), forest.predict(noisy_dataset.features)
        )

    @pytest.mark.parametrize("kwargs", [{"n_estimators": 0}, {"seed": -1}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidParameter):
            ForestParams(**kwargs)


def test_bootstrap_sample():
    rows = bootstrap_sample(20, make_rng(1))
    assert rows.shape == (20,)
    assert rows.min() >= 0 and rows.max() < 20
    np.testing.assert_array_equal(rows, bootstrap_sample(20, make_rng(1)))


def test_bootstrap_keeps_about_two_thirds_of_the_rows():
    samples = [bootstrap_sample(1000, make_rng(seed)) for seed in range(20)]
    fractions = [np.unique(rows).size / 1000 for rows in samples]
    assert 0.60 <= np.mean(fractions) <= 0.67


class TestAdaBoostR2:
    def test_prefix_equals_fewer_rounds(self, noisy_dataset):
        large = fit_adaboost_r2(noisy_dataset, n_estimators=8, seed=2)
        small = fit_adaboost_r2(noisy_dataset, n_estimators=3, seed=2)
        np.testing.assert_array_equal(
            large.truncate(3).predict(noisy_dataset.features),
            small.predict(noisy_dataset.features),
        )

    def test_learner_weights_are_positive(self, noisy_dataset):
        boosted = fit_adaboost_r2(noisy_dataset, n_estimators=10)
        assert 1 <= boosted.n_estimators <= 10
        assert all(weight > 0 for weight in boosted.learner_weights)
        assert all(loss < 0.5 for loss in boosted.average_losses)

    def test_distributions_are_normalized(self, noisy_dataset):
        boosted = fit_adaboost_r2(noisy_dataset, n_estimators=5)
        for weights in boosted.history:
            assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_perfect_fit_stops(self, make_dataset):
        boosted = fit_adaboost_r2(make_dataset([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]), n_estimators=5)
        assert boosted.n_estimators == 1
        np.testing.assert_array_equal(boosted.predict([[10.0]]), [4.0])

    def test_deterministic(self, noisy_dataset):
        first = fit_adaboost_r2(noisy_dataset, n_estimators=4, seed=9)
        second = fit_adaboost_r2(noisy_dataset, n_estimators=4, seed=9)
        assert first.to_dict() == second.to_dict()

    def test_beats_a_single_stump(self, noisy_dataset):
        boosted = fit_adaboost_r2(noisy_dataset, 30, TreeParams(max_depth=1))
        stump = fit_tree(noisy_dataset, TreeParams(max_depth=1))
        rows, targets = noisy_dataset.features, noisy_dataset.targets
        assert mse(targets, boosted.predict(rows)) < mse(targets, stump.predict(rows))

    def test_dict_round_trip(self, noisy_dataset):
        boosted = fit_adaboost_r2(noisy_dataset, n_estimators=4, loss=BoostLoss.SQUARE)
        copy = BoostedRegressor.from_dict(boosted.to_dict())
        assert copy.loss is BoostLoss.SQUARE
        np.testing.assert_array_equal(
            copy.predict(noisy_dataset.features), boosted.predict(noisy_dataset.features)
        )

    def test_invalid_n_estimators(self, noisy_dataset):
        with pytest.raises(InvalidParameter):
            fit_adaboost_r2(noisy_dataset, n_estimators=0)


@pytest.mark.parametrize(
    "loss, expected",
    [
        (BoostLoss.LINEAR, [0.0, 0.5, 1.0]),
        (BoostLoss.SQUARE, [0.0, 0.25, 1.0]),
        (BoostLoss.EXPONENTIAL, [0.0, 1.0 - math.exp(-0.5), 1.0 - math.exp(-1.0)]),
    ],
)
def test_boost_losses(loss, expected):
    np.testing.assert_allclose(loss(np.array([0.0, 0.5, 1.0])), expected)
