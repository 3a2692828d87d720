from __future__ import annotations

import logging
import typing as t

from .datamodel import Dataset
from .ensemble import (
    DEFAULT_BOOST_TREE,
    ForestParams,
    fit_adaboost_r2,
    fit_extra_trees,
    fit_random_forest,
)
from .exceptions import UnknownModelKind
from .tree import TreeParams, fit_tree
from .types import BaseModelKind, ModelInfo

logger = logging.getLogger(__name__)


class ModelRepository:
    """Registry of base-model factories, looked up by :class:`~grainfuse.types.BaseModelKind`
    or by name.

    A factory is called as ``factory(train, **kwargs)`` and returns a fitted model. Keyword
    arguments given at registration act as defaults that can be overridden per call.
    """

    def __init__(self, infos: t.Iterable[ModelInfo] = ()):
        self.types_by_str: t.Dict[str, BaseModelKind] = {}
        self.infos: t.Dict[BaseModelKind, ModelInfo] = {}
        for info in infos:
            self.register(info=info)

    def register(
        self,
        kind: t.Union[BaseModelKind, str] = None,
        factory: t.Callable = None,
        info: ModelInfo = None,
        kwargs: t.Optional[dict] = None,
    ):
        if not (bool(kind) ^ bool(info)):
            raise ValueError("Supply either kind or info")

        if info is None:
            if factory is None:
                raise TypeError(f"A factory is required to register {kind}")
            info = ModelInfo(kind=BaseModelKind.parse(kind), factory=factory, kwargs=kwargs)

        self.infos[info.kind] = info
        for key in (info.kind.value, info.kind.display_name.lower()):
            self.types_by_str[key] = info.kind

    def resolve(self, key: t.Union[BaseModelKind, str]) -> BaseModelKind:
        if isinstance(key, str) and not isinstance(key, BaseModelKind):
            kind = self.types_by_str.get(key.strip().lower())
            if kind is None:
                try:
                    kind = BaseModelKind.parse(key)
                except ValueError:
                    raise UnknownModelKind(key) from None
            key = kind
        if key not in self.infos:
            raise UnknownModelKind(key)
        return key

    def get_info(self, key: t.Union[BaseModelKind, str]) -> ModelInfo:
        return self.infos[self.resolve(key)]

    def knows_about(self, key: t.Union[BaseModelKind, str]) -> bool:
        try:
            self.resolve(key)
        except UnknownModelKind:
            return False
        return True

    def create(self, key: t.Union[BaseModelKind, str], train: Dataset, **kwargs):
        """Fit a model of kind ``key`` on ``train``

        :param key: The model kind, as enum member or name
        :param train: The training data
        :param kwargs: Any keyword arguments for the factory. These have preference over the
            keyword arguments supplied at registration
        """
        info = self.get_info(key)
        combined_kwargs = {**(info.kwargs or {}), **kwargs}
        logger.debug("Fitting %s with %s", info.kind.value, combined_kwargs)
        return info.factory(train, **combined_kwargs)

    def family(self, key: t.Union[BaseModelKind, str], **kwargs) -> t.Callable:
        """A ``(train, n_estimators) -> model`` constructor for n_estimators tuning"""
        kind = self.resolve(key)

        def construct(train: Dataset, n_estimators: int):
            return self.create(kind, train, n_estimators=n_estimators, **kwargs)

        construct.__qualname__ = f"{kind.value}_family"
        return construct

    def kinds(self) -> t.List[BaseModelKind]:
        return [kind for kind in BaseModelKind if kind in self.infos]

    def __contains__(self, item):
        return self.knows_about(item)


def adaboost_factory(
    train: Dataset,
    n_estimators: int = 50,
    tree_params: TreeParams = DEFAULT_BOOST_TREE,
    seed: int = 0,
    n_jobs: int = 1,
):
    # boosting rounds depend on each other, n_jobs is accepted for a uniform signature
    return fit_adaboost_r2(train, n_estimators, tree_params=tree_params, seed=seed)


def decision_tree_factory(
    train: Dataset, tree_params: TreeParams = TreeParams(), seed: int = 0, n_jobs: int = 1
):
    return fit_tree(train, tree_params)


def extra_trees_factory(
    train: Dataset,
    n_estimators: int = 84,
    tree_params: TreeParams = TreeParams(),
    seed: int = 0,
    n_jobs: int = 1,
):
    params = ForestParams(n_estimators=n_estimators, tree_params=tree_params, seed=seed)
    return fit_extra_trees(train, params, n_jobs=n_jobs)


def random_forest_factory(
    train: Dataset,
    n_estimators: int = 225,
    tree_params: TreeParams = TreeParams(),
    seed: int = 0,
    n_jobs: int = 1,
):
    params = ForestParams(n_estimators=n_estimators, tree_params=tree_params, seed=seed)
    return fit_random_forest(train, params, n_jobs=n_jobs)


DEFAULT_MODELS = (
    ModelInfo(BaseModelKind.ADABOOST, adaboost_factory),
    ModelInfo(BaseModelKind.DECISION_TREE, decision_tree_factory),
    ModelInfo(BaseModelKind.EXTRA_TREES, extra_trees_factory),
    ModelInfo(BaseModelKind.RANDOM_FOREST, random_forest_factory),
)


def default_repository() -> ModelRepository:
    """A fresh repository holding the four base regressors"""
    return ModelRepository(DEFAULT_MODELS)
