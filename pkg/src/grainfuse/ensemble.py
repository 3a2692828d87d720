"""Tree ensembles: bagged random forests, extremely randomized trees and AdaBoost.

Every forest member ``b`` draws from its own stream ``make_rng(seed, b)``. A member therefore
does not depend on how many other members are trained, or where: parallel training is
bit-identical to sequential training, and the first ``k`` members of a large forest are exactly
the forest of ``k`` members.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import logging
import math
import typing as t

import numpy as np
from joblib import Parallel, delayed

from .datamodel import Dataset
from .exceptions import DimensionMismatch, InvalidParameter
from .helpers import as_feature_matrix, make_rng, weighted_median
from .tree import (
    RegressionTree,
    TreeParams,
    WeightedStump,
    check_labels,
    fit_stump,
    grow_tree,
    random_split,
)

logger = logging.getLogger(__name__)

#: error used in place of a zero weighted error when computing the learner weight
PERFECT_ERROR = 1e-10
DEFAULT_BOOST_TREE = TreeParams(max_depth=3)


@dataclasses.dataclass(frozen=True)
class ForestParams:
    """``bootstrap=None`` picks the family default: resampling for random forests, the entire
    learning sample for extra trees
    """

    n_estimators: int = 100
    bootstrap: t.Optional[bool] = None
    tree_params: TreeParams = TreeParams()
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise InvalidParameter(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.seed < 0:
            raise InvalidParameter(f"seed must be non-negative, got {self.seed}")


@dataclasses.dataclass(frozen=True, eq=False)
class Forest:
    trees: t.Tuple[RegressionTree, ...]
    seed: int
    randomized: bool = False
    bootstrap: bool = True

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def per_tree_seeds(self) -> t.Tuple[t.Tuple[int, int], ...]:
        """``(seed, b)`` pairs the member streams were derived from"""
        return tuple((self.seed, b) for b in range(len(self.trees)))

    def predict(self, x) -> np.ndarray:
        matrix = as_feature_matrix(x, self.n_features)
        total = np.zeros(matrix.shape[0])
        for tree in self.trees:
            total = total + tree.predict(matrix)
        return total / len(self.trees)

    def truncate(self, n_estimators: int) -> Forest:
        return dataclasses.replace(self, trees=self.trees[:n_estimators])

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "randomized": self.randomized,
            "bootstrap": self.bootstrap,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Forest:
        trees = tuple(RegressionTree.from_dict(tree) for tree in data["trees"])
        return cls(trees, data["seed"], data["randomized"], data["bootstrap"])


def bootstrap_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform draws with replacement from ``0..n-1``"""
    if n < 1:
        raise InvalidParameter(f"cannot bootstrap {n} samples")
    return rng.integers(0, n, size=n)


def _fit_member(
    features: np.ndarray,
    targets: np.ndarray,
    params: ForestParams,
    index: int,
    randomized: bool,
    bootstrap: bool,
) -> RegressionTree:
    rng = make_rng(params.seed, index)
    if bootstrap:
        rows = bootstrap_sample(targets.shape[0], rng)
        features, targets = features[rows], targets[rows]
    splitter = functools.partial(random_split, rng=rng) if randomized else None
    return grow_tree(features, targets, params.tree_params, splitter)


def _fit_forest(
    train: Dataset, params: ForestParams, randomized: bool, bootstrap: bool, n_jobs: int
) -> Forest:
    trees = Parallel(n_jobs=n_jobs)(
        delayed(_fit_member)(train.features, train.targets, params, b, randomized, bootstrap)
        for b in range(params.n_estimators)
    )
    logger.debug(
        "Fitted %s of %d trees on %d samples",
        "extra trees" if randomized else "random forest",
        params.n_estimators,
        train.n,
    )
    return Forest(tuple(trees), params.seed, randomized, bootstrap)


def fit_random_forest(train: Dataset, params: ForestParams, n_jobs: int = 1) -> Forest:
    """Bagging: every tree is a full CART search on a bootstrap resample of ``train``. All
    features are considered at every split
    """
    bootstrap = True if params.bootstrap is None else params.bootstrap
    return _fit_forest(train, params, randomized=False, bootstrap=bootstrap, n_jobs=n_jobs)


def fit_extra_trees(train: Dataset, params: ForestParams, n_jobs: int = 1) -> Forest:
    """Extremely randomized trees: every tree sees the entire learning sample and splits on the
    best of one uniformly drawn threshold per feature
    """
    bootstrap = False if params.bootstrap is None else params.bootstrap
    return _fit_forest(train, params, randomized=True, bootstrap=bootstrap, n_jobs=n_jobs)


def predict_forest(forest: Forest, x) -> float:
    row = np.asarray(x, dtype=np.float64)
    if row.ndim != 1:
        raise DimensionMismatch("predict_forest takes a single feature row")
    return float(forest.predict(row)[0])


def learner_weight(error: float) -> float:
    """Weight of a weak classifier with weighted error ``error``: ½·ln((1 − e) / e)"""
    return 0.5 * math.log((1.0 - error) / error)


def normalizer(error: float) -> float:
    """Closed form of the re-weighting normalizer: 2·√(e·(1 − e))"""
    return 2.0 * math.sqrt(error * (1.0 - error))


@dataclasses.dataclass(frozen=True, eq=False)
class BoostState:
    """Everything discrete AdaBoost records while training.

    ``history`` holds the sample distributions D_1, D_2, ...: the distribution each learner was
    trained on, followed by the distribution after the last re-weighting. ``weights`` is the
    final distribution.
    """

    learners: t.Tuple[WeightedStump, ...]
    alphas: t.Tuple[float, ...]
    normalizers: t.Tuple[float, ...]
    errors: t.Tuple[float, ...]
    history: t.Tuple[np.ndarray, ...]

    @property
    def weights(self) -> np.ndarray:
        return self.history[-1]

    @property
    def rounds_completed(self) -> int:
        return len(self.learners)


@dataclasses.dataclass(frozen=True, eq=False)
class BoostedClassifier:
    """Strong classifier ``sign(Σ α_t·H_t(x))`` where ``sign(0)`` is taken to be +1"""

    state: BoostState
    n_features: int

    def decision_function(self, x) -> np.ndarray:
        matrix = as_feature_matrix(x, self.n_features)
        score = np.zeros(matrix.shape[0])
        for alpha, learner in zip(self.state.alphas, self.state.learners):
            score = score + alpha * learner.predict(matrix)
        return score

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) >= 0.0, 1.0, -1.0)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "learners": [learner.to_dict() for learner in self.state.learners],
            "alphas": list(self.state.alphas),
            "normalizers": list(self.state.normalizers),
            "errors": list(self.state.errors),
            "history": [weights.tolist() for weights in self.state.history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> BoostedClassifier:
        state = BoostState(
            learners=tuple(WeightedStump(**learner) for learner in data["learners"]),
            alphas=tuple(data["alphas"]),
            normalizers=tuple(data["normalizers"]),
            errors=tuple(data["errors"]),
            history=tuple(np.asarray(weights) for weights in data["history"]),
        )
        return cls(state, data["n_features"])


def fit_adaboost_classifier(train: Dataset, rounds: int) -> BoostedClassifier:
    """Discrete AdaBoost with weighted stumps on labels in {+1, -1}.

    Starts from the uniform distribution. Every round fits the stump with the lowest weighted
    error ``e``, gives it weight ``learner_weight(e)`` and re-weights the samples by
    ``exp(-α·y·H(x))`` divided by the normalizer. Training stops early when a stump is perfect
    (``e == 0``, kept with its weight computed at ``PERFECT_ERROR``) or no better than chance
    (``e >= 0.5``, discarded).
    """
    if rounds < 1:
        raise InvalidParameter(f"the number of boosting rounds must be >= 1, got {rounds}")
    labels = check_labels(train.targets)
    n = labels.shape[0]
    distribution = np.full(n, 1.0 / n)
    learners, alphas, normalizers, errors, history = [], [], [], [], [distribution]

    for round_number in range(1, rounds + 1):
        stump = fit_stump(train.features, labels, distribution)
        predicted = stump.predict(train.features)
        error = float(np.sum(distribution[predicted != labels]))
        if error >= 0.5:
            logger.debug(
                "Round %d: error %.6f is no better than chance, stopping", round_number, error
            )
            break
        if error == 0.0:
            learners.append(stump)
            alphas.append(learner_weight(PERFECT_ERROR))
            normalizers.append(normalizer(error))
            errors.append(error)
            logger.debug("Round %d: perfect stump, stopping", round_number)
            break
        alpha = learner_weight(error)
        unnormalized = distribution * np.exp(-alpha * labels * predicted)
        distribution = unnormalized / unnormalized.sum()
        learners.append(stump)
        alphas.append(alpha)
        normalizers.append(normalizer(error))
        errors.append(error)
        history.append(distribution)

    state = BoostState(
        tuple(learners), tuple(alphas), tuple(normalizers), tuple(errors), tuple(history)
    )
    return BoostedClassifier(state, train.d)


class BoostLoss(str, enum.Enum):
    LINEAR = "linear"
    SQUARE = "square"
    EXPONENTIAL = "exponential"

    def __call__(self, relative_error: np.ndarray) -> np.ndarray:
        if self is BoostLoss.SQUARE:
            return relative_error**2
        if self is BoostLoss.EXPONENTIAL:
            return 1.0 - np.exp(-relative_error)
        return relative_error


@dataclasses.dataclass(frozen=True, eq=False)
class BoostedRegressor:
    """AdaBoost.R2 ensemble; predictions are the weighted median of the member predictions"""

    learners: t.Tuple[RegressionTree, ...]
    learner_weights: t.Tuple[float, ...]
    loss: BoostLoss = BoostLoss.LINEAR
    average_losses: t.Tuple[float, ...] = ()
    history: t.Tuple[np.ndarray, ...] = ()

    @property
    def n_estimators(self) -> int:
        return len(self.learners)

    @property
    def n_features(self) -> int:
        return self.learners[0].n_features

    def predict(self, x) -> np.ndarray:
        matrix = as_feature_matrix(x, self.n_features)
        predictions = np.column_stack([learner.predict(matrix) for learner in self.learners])
        return weighted_median(predictions, np.asarray(self.learner_weights))

    def truncate(self, n_estimators: int) -> BoostedRegressor:
        return dataclasses.replace(
            self,
            learners=self.learners[:n_estimators],
            learner_weights=self.learner_weights[:n_estimators],
            average_losses=self.average_losses[:n_estimators],
            history=self.history[: n_estimators + 1],
        )

    def to_dict(self) -> dict:
        return {
            "loss": self.loss.value,
            "learner_weights": list(self.learner_weights),
            "average_losses": list(self.average_losses),
            "learners": [learner.to_dict() for learner in self.learners],
        }

    @classmethod
    def from_dict(cls, data: dict) -> BoostedRegressor:
        return cls(
            learners=tuple(RegressionTree.from_dict(tree) for tree in data["learners"]),
            learner_weights=tuple(data["learner_weights"]),
            loss=BoostLoss(data["loss"]),
            average_losses=tuple(data["average_losses"]),
        )


def fit_adaboost_r2(
    train: Dataset,
    n_estimators: int = 50,
    tree_params: TreeParams = DEFAULT_BOOST_TREE,
    seed: int = 0,
    loss: BoostLoss = BoostLoss.LINEAR,
) -> BoostedRegressor:
    """AdaBoost.R2 regression boosting.

    Each round resamples the training set according to the current distribution, fits a tree,
    scores every training sample with ``loss(|error| / max |error|)`` and re-weights by
    ``β ** (1 - L_i)`` with ``β = L̄ / (1 - L̄)``. The learner gets weight ``log(1 / β)``.
    Boosting stops when a tree fits perfectly or when the average loss reaches 0.5; the first
    tree is always kept so the ensemble is never empty.
    """
    if n_estimators < 1:
        raise InvalidParameter(f"n_estimators must be >= 1, got {n_estimators}")
    loss = BoostLoss(loss)
    features, targets = train.features, train.targets
    n = train.n
    rng = make_rng(seed)
    distribution = np.full(n, 1.0 / n)
    learners, weights, losses, history = [], [], [], [distribution]

    for round_number in range(1, n_estimators + 1):
        rows = rng.choice(n, size=n, p=distribution)
        tree = grow_tree(features[rows], targets[rows], tree_params)
        error = np.abs(tree.predict(features) - targets)
        max_error = error.max()
        if max_error == 0.0:
            learners.append(tree)
            weights.append(1.0)
            losses.append(0.0)
            logger.debug("Round %d: perfect fit, stopping", round_number)
            break
        sample_loss = loss(error / max_error)
        average_loss = float(np.dot(distribution, sample_loss))
        if average_loss <= 0.0:
            learners.append(tree)
            weights.append(1.0)
            losses.append(0.0)
            break
        if average_loss >= 0.5:
            if not learners:
                learners.append(tree)
                weights.append(1.0)
                losses.append(average_loss)
            logger.debug(
                "Round %d: average loss %.4f >= 0.5, stopping", round_number, average_loss
            )
            break
        beta = average_loss / (1.0 - average_loss)
        distribution = distribution * np.power(beta, 1.0 - sample_loss)
        distribution = distribution / distribution.sum()
        learners.append(tree)
        weights.append(math.log(1.0 / beta))
        losses.append(average_loss)
        history.append(distribution)

    return BoostedRegressor(tuple(learners), tuple(weights), loss, tuple(losses), tuple(history))
