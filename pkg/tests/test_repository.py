from unittest.mock import Mock, call

import pytest

from grainfuse.ensemble import BoostedRegressor, Forest
from grainfuse.exceptions import UnknownModelKind
from grainfuse.repository import ModelRepository, default_repository
from grainfuse.tree import RegressionTree
from grainfuse.types import BaseModelKind, ModelInfo


@pytest.fixture
def repo():
    return ModelRepository()


@pytest.fixture
def factory():
    return Mock()


def test_register_and_create(repo, factory):
    repo.register(BaseModelKind.RANDOM_FOREST, factory)
    train = object()
    assert repo.create(BaseModelKind.RANDOM_FOREST, train) is factory.return_value
    assert factory.call_args == call(train)


def test_call_time_kwargs_override_registered_kwargs(repo, factory):
    repo.register(BaseModelKind.EXTRA_TREES, factory, kwargs={"n_estimators": 84, "seed": 1})
    repo.create("extra_trees", "train", seed=3)
    assert factory.call_args == call("train", n_estimators=84, seed=3)


def test_register_info(repo, factory):
    repo.register(info=ModelInfo(BaseModelKind.ADABOOST, factory))
    assert BaseModelKind.ADABOOST in repo


@pytest.mark.parametrize(
    "key", ["random_forest", "Random forest", "random-forest", " RANDOM_FOREST "]
)
def test_resolve_by_name(repo, factory, key):
    repo.register(BaseModelKind.RANDOM_FOREST, factory)
    assert repo.resolve(key) is BaseModelKind.RANDOM_FOREST


def test_unknown_kind(repo, factory):
    repo.register(BaseModelKind.RANDOM_FOREST, factory)
    assert not repo.knows_about("gradient_boosting")
    assert not repo.knows_about(BaseModelKind.ADABOOST)
    with pytest.raises(UnknownModelKind):
        repo.create("gradient_boosting", None)
    with pytest.raises(KeyError):
        repo.get_info(BaseModelKind.ADABOOST)


def test_register_requires_kind_xor_info(repo, factory):
    with pytest.raises(ValueError):
        repo.register()
    with pytest.raises(ValueError):
        repo.register(
            BaseModelKind.ADABOOST, factory, info=ModelInfo(BaseModelKind.ADABOOST, factory)
        )


def test_register_requires_factory(repo):
    with pytest.raises(TypeError):
        repo.register(BaseModelKind.ADABOOST)


def test_family_passes_n_estimators(repo, factory):
    repo.register(BaseModelKind.ADABOOST, factory)
    construct = repo.family("adaboost", seed=4)
    construct("train", 17)
    assert factory.call_args == call("train", n_estimators=17, seed=4)


def test_default_repository_kinds():
    assert default_repository().kinds() == list(BaseModelKind)


@pytest.mark.parametrize(
    "kind, cls",
    [
        (BaseModelKind.ADABOOST, BoostedRegressor),
        (BaseModelKind.DECISION_TREE, RegressionTree),
        (BaseModelKind.EXTRA_TREES, Forest),
        (BaseModelKind.RANDOM_FOREST, Forest),
    ],
)
def test_default_factories(noisy_dataset, kind, cls):
    kwargs = {"n_estimators": 3} if kind.has_n_estimators else {}
    model = default_repository().create(kind, noisy_dataset, **kwargs)
    assert isinstance(model, cls)
    assert model.predict(noisy_dataset.features).shape == (noisy_dataset.n,)


def test_default_n_estimators(noisy_dataset):
    forest = default_repository().create(BaseModelKind.EXTRA_TREES, noisy_dataset)
    assert forest.n_estimators == 84
