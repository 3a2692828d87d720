"""Stacked model fusion.

Base regressors are tuned on their own, then their predictions replace the original features
and a random forest is trained on them. The default ``in_sample`` mode feeds the meta forest
with predictions the bases make on the very rows they were fitted on; ``out_of_fold`` mode
builds those meta features from k-fold cross-fitting instead, so no base model has seen the row
it predicts.
"""
from __future__ import annotations

import dataclasses
import enum
import itertools
import logging
import typing as t

import numpy as np
from joblib import Parallel, delayed

from .datamodel import Dataset
from .ensemble import Forest, ForestParams, fit_random_forest
from .exceptions import DimensionMismatch, InvalidParameter, UnknownModelKind
from .helpers import make_rng
from .metrics import EvaluatedModel, mse
from .repository import ModelRepository, default_repository
from .tree import Criterion, TreeParams, fit_tree
from .types import BaseModelKind, ModelDescriptor

logger = logging.getLogger(__name__)

DEFAULT_N_FOLDS = 5
DEFAULT_TREE_GRID = {
    "criterion": (Criterion.SQUARED_ERROR, Criterion.ABSOLUTE_ERROR),
    "min_samples_split": (2, 5, 10, 20),
    "min_samples_leaf": (1, 2, 5, 10),
}


class LeakageMode(str, enum.Enum):
    IN_SAMPLE = "in_sample"
    OUT_OF_FOLD = "out_of_fold"

    @classmethod
    def parse(cls, value: t.Union["LeakageMode", str]) -> "LeakageMode":
        if isinstance(value, cls):
            return value
        aliases = {"in-sample": cls.IN_SAMPLE, "oof": cls.OUT_OF_FOLD}
        value = str(value).strip().lower()
        return aliases.get(value) or cls(value.replace("-", "_"))


def parse_members(value: t.Union[str, t.Iterable]) -> t.Tuple[BaseModelKind, ...]:
    """``"adaboost+extra_trees"`` or an iterable of kinds to a tuple of kinds"""
    if isinstance(value, str):
        value = [part for part in value.split("+") if part.strip()]
    try:
        return tuple(BaseModelKind.parse(member) for member in value)
    except ValueError as e:
        raise InvalidParameter(f"unknown model kind in {value!r}") from e


@dataclasses.dataclass(frozen=True)
class FusionSpec:
    members: t.Tuple[BaseModelKind, ...]
    meta_n_estimators: int = 100
    meta_seed: int = 0
    leakage_mode: LeakageMode = LeakageMode.IN_SAMPLE
    n_folds: int = DEFAULT_N_FOLDS

    def __post_init__(self):
        members = parse_members(self.members)
        if len(set(members)) != len(members):
            raise InvalidParameter(f"fusion members must be distinct, got {members}")
        if not 2 <= len(members) <= len(BaseModelKind):
            raise InvalidParameter(f"a fusion needs 2 to 4 members, got {len(members)}")
        if self.meta_n_estimators < 1:
            raise InvalidParameter(f"meta_n_estimators must be >= 1, got {self.meta_n_estimators}")
        if self.n_folds < 2:
            raise InvalidParameter(f"n_folds must be >= 2, got {self.n_folds}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "leakage_mode", LeakageMode.parse(self.leakage_mode))

    @property
    def descriptor(self) -> ModelDescriptor:
        return ModelDescriptor(self.members)


@dataclasses.dataclass(frozen=True, eq=False)
class TrainedBase:
    """A fitted base model together with the keyword arguments it was created with, so it can
    be re-fitted on other rows
    """

    kind: BaseModelKind
    model: t.Any
    params: t.Dict[str, t.Any]

    @property
    def n_features(self) -> int:
        return self.model.n_features

    @property
    def n_estimators(self) -> t.Optional[int]:
        return self.params.get("n_estimators") if self.kind.has_n_estimators else None

    def predict(self, x) -> np.ndarray:
        return self.model.predict(x)


@dataclasses.dataclass(frozen=True, eq=False)
class FusionModel:
    bases: t.Tuple[TrainedBase, ...]
    meta: Forest
    leakage_mode: LeakageMode = LeakageMode.IN_SAMPLE
    folds: t.Optional[t.Tuple[np.ndarray, ...]] = None

    @property
    def members(self) -> t.Tuple[BaseModelKind, ...]:
        return tuple(base.kind for base in self.bases)

    @property
    def n_features(self) -> int:
        return self.bases[0].n_features

    @property
    def n_estimators(self) -> int:
        return self.meta.n_estimators

    def stack(self, x) -> np.ndarray:
        return np.column_stack([base.predict(x) for base in self.bases])

    def predict(self, x) -> np.ndarray:
        return self.meta.predict(self.stack(x))

    def truncate(self, n_estimators: int) -> FusionModel:
        return dataclasses.replace(self, meta=self.meta.truncate(n_estimators))


def _member_name(member, index: int) -> str:
    kind = getattr(member, "kind", None)
    return kind.value if isinstance(kind, BaseModelKind) else f"model_{index}"


def stack_features(members: t.Sequence[t.Any], data: Dataset) -> Dataset:
    """Replace the features of ``data`` by one column of predictions per member; the targets
    are carried over unchanged
    """
    for member in members:
        n_features = getattr(member, "n_features", data.d)
        if n_features != data.d:
            raise DimensionMismatch(f"member expects {n_features} features, data has {data.d}")
    columns = [np.asarray(member.predict(data.features), dtype=np.float64) for member in members]
    names = [_member_name(member, j) for j, member in enumerate(members)]
    return data.with_features(np.column_stack(columns), names)


def fold_indices(n: int, n_folds: int, seed: int) -> t.Tuple[np.ndarray, ...]:
    """Shuffle ``0..n-1`` with the given seed and cut it into ``min(n_folds, n)`` folds"""
    if n < 2:
        raise InvalidParameter(f"need at least 2 rows for cross-fitting, got {n}")
    permutation = make_rng(seed).permutation(n)
    return tuple(np.sort(fold) for fold in np.array_split(permutation, min(n_folds, n)))


def out_of_fold_features(
    bases: t.Sequence[TrainedBase],
    train: Dataset,
    folds: t.Sequence[np.ndarray],
    repository: ModelRepository,
) -> Dataset:
    """Meta features where the prediction for each row comes from a copy of the base model
    that was re-fitted without the row's fold
    """
    stacked = np.empty((train.n, len(bases)))
    for fold in folds:
        keep = np.setdiff1d(np.arange(train.n), fold, assume_unique=True)
        fold_train = train.take(keep)
        for j, base in enumerate(bases):
            refit = repository.create(base.kind, fold_train, **base.params)
            stacked[fold, j] = refit.predict(train.features[fold])
    return train.with_features(stacked, [base.kind.value for base in bases])


def _meta_train(
    bases: t.Sequence[TrainedBase],
    train: Dataset,
    spec: FusionSpec,
    repository: ModelRepository,
) -> t.Tuple[Dataset, t.Optional[t.Tuple[np.ndarray, ...]]]:
    if spec.leakage_mode is LeakageMode.IN_SAMPLE:
        return stack_features(bases, train), None
    folds = fold_indices(train.n, spec.n_folds, spec.meta_seed)
    return out_of_fold_features(bases, train, folds, repository), folds


@dataclasses.dataclass(frozen=True, eq=False)
class TuneResult:
    grid: t.Tuple[int, ...]
    chosen: int
    score_per_candidate: t.Tuple[float, ...]
    model: t.Any = None

    @property
    def best_score(self) -> float:
        return self.score_per_candidate[self.grid.index(self.chosen)]


@dataclasses.dataclass(frozen=True, eq=False)
class TreeTuneResult:
    candidates: t.Tuple[TreeParams, ...]
    chosen: TreeParams
    score_per_candidate: t.Tuple[float, ...]
    model: t.Any = None


def _first_minimum(scores: t.Sequence[float]) -> int:
    return int(np.argmin(scores))


def tune_n_estimators(
    family: t.Callable[[Dataset, int], t.Any],
    grid: t.Sequence[int],
    train: Dataset,
    eval_set: Dataset,
    reuse_prefix: bool = True,
    n_jobs: int = 1,
) -> TuneResult:
    """Pick the n_estimators from ``grid`` with the lowest MSE on ``eval_set``; the first
    minimum wins ties.

    ``family(train, n_estimators)`` must return a fitted model. When the model returned for
    ``max(grid)`` can be truncated to its first ``k`` members, every candidate is scored on a
    prefix of that single model instead of being trained from scratch. Ensembles whose members
    are drawn from per-member streams make both routes give identical results.
    """
    grid = tuple(int(value) for value in grid)
    if not grid:
        raise InvalidParameter("tuning grid is empty")
    if min(grid) < 1:
        raise InvalidParameter(f"grid values must be positive, got {min(grid)}")

    largest = family(train, max(grid)) if reuse_prefix else None
    if largest is not None and hasattr(largest, "truncate"):
        models = [largest.truncate(k) for k in grid]
    else:
        fitted = {} if largest is None else {max(grid): largest}
        missing = [k for k in dict.fromkeys(grid) if k not in fitted]
        fitted.update(
            zip(missing, Parallel(n_jobs=n_jobs)(delayed(family)(train, k) for k in missing))
        )
        models = [fitted[k] for k in grid]
    scores = [mse(eval_set.targets, model.predict(eval_set.features)) for model in models]

    best = _first_minimum(scores)
    logger.info(
        "Tuned %s: n_estimators=%d (MSE %.4f) over %d candidates",
        getattr(family, "__qualname__", "model"),
        grid[best],
        scores[best],
        len(grid),
    )
    return TuneResult(grid, grid[best], tuple(scores), models[best])


def tune_tree_params(
    train: Dataset,
    eval_set: Dataset,
    grid: t.Optional[t.Mapping[str, t.Sequence]] = None,
    max_depth: t.Optional[int] = None,
) -> TreeTuneResult:
    """Grid search over criterion x min_samples_split x min_samples_leaf for a single CART
    tree, scored by MSE on ``eval_set``; the first minimum in product order wins
    """
    grid = {**DEFAULT_TREE_GRID, **(grid or {})}
    candidates = tuple(
        TreeParams(criterion, max_depth, min_split, min_leaf)
        for criterion, min_split, min_leaf in itertools.product(
            grid["criterion"], grid["min_samples_split"], grid["min_samples_leaf"]
        )
    )
    if not candidates:
        raise InvalidParameter("tree parameter grid is empty")
    models = [fit_tree(train, params) for params in candidates]
    scores = [mse(eval_set.targets, model.predict(eval_set.features)) for model in models]
    best = _first_minimum(scores)
    logger.info("Tuned decision tree: %s (MSE %.4f)", candidates[best], scores[best])
    return TreeTuneResult(candidates, candidates[best], tuple(scores), models[best])


def tune_base(
    kind: t.Union[BaseModelKind, str],
    train: Dataset,
    eval_set: Dataset,
    grid: t.Sequence[int],
    seed: int = 0,
    repository: t.Optional[ModelRepository] = None,
    tree_grid: t.Optional[t.Mapping[str, t.Sequence]] = None,
    n_jobs: int = 1,
) -> TrainedBase:
    """Tune one base regressor: n_estimators for the ensembles, the tree parameters for the
    decision tree
    """
    repository = repository or default_repository()
    kind = repository.resolve(kind)
    if kind.has_n_estimators:
        result = tune_n_estimators(
            repository.family(kind, seed=seed, n_jobs=n_jobs), grid, train, eval_set
        )
        return TrainedBase(kind, result.model, {"n_estimators": result.chosen, "seed": seed})
    result = tune_tree_params(train, eval_set, tree_grid)
    return TrainedBase(kind, result.model, {"tree_params": result.chosen, "seed": seed})


def fit_fusion(
    train: Dataset,
    test: Dataset,
    spec: FusionSpec,
    bases: t.Optional[t.Mapping[BaseModelKind, TrainedBase]] = None,
    grid: t.Sequence[int] = (1, 10, 50, 100),
    repository: t.Optional[ModelRepository] = None,
    n_jobs: int = 1,
) -> FusionModel:
    """Fit a fusion of ``spec.members`` with a meta forest of ``spec.meta_n_estimators`` trees.

    Base models missing from ``bases`` are tuned on ``train`` against ``test`` over ``grid``.
    """
    repository = repository or default_repository()
    bases = dict(bases or {})
    for kind in spec.members:
        if kind not in bases:
            bases[kind] = tune_base(
                kind, train, test, grid, spec.meta_seed, repository, n_jobs=n_jobs
            )
    members = tuple(bases[kind] for kind in spec.members)
    meta_train, folds = _meta_train(members, train, spec, repository)
    meta = fit_random_forest(
        meta_train, ForestParams(spec.meta_n_estimators, seed=spec.meta_seed), n_jobs=n_jobs
    )
    return FusionModel(members, meta, spec.leakage_mode, folds)


def tune_fusion(
    train: Dataset,
    test: Dataset,
    members: t.Sequence[BaseModelKind],
    bases: t.Mapping[BaseModelKind, TrainedBase],
    grid: t.Sequence[int],
    seed: int = 0,
    leakage_mode: LeakageMode = LeakageMode.IN_SAMPLE,
    repository: t.Optional[ModelRepository] = None,
    n_jobs: int = 1,
) -> t.Tuple[FusionModel, TuneResult]:
    """Tune the meta forest's n_estimators of one fusion over ``grid``, scored on ``test``.
    The meta features are computed once and shared by all candidates
    """
    repository = repository or default_repository()
    spec = FusionSpec(tuple(members), max(grid), seed, leakage_mode)
    selected = tuple(bases[kind] for kind in spec.members)
    meta_train, folds = _meta_train(selected, train, spec, repository)
    meta_test = stack_features(selected, test)

    def meta_family(data: Dataset, n_estimators: int) -> Forest:
        return fit_random_forest(data, ForestParams(n_estimators, seed=seed), n_jobs=n_jobs)

    meta_family.__qualname__ = spec.descriptor.name
    result = tune_n_estimators(meta_family, grid, meta_train, meta_test, n_jobs=n_jobs)
    return FusionModel(selected, result.model, spec.leakage_mode, folds), result


def enumerate_models() -> t.List[ModelDescriptor]:
    """The 15 models of the comparison: the four single models in
    :class:`~grainfuse.types.BaseModelKind` order, then every fusion of two, three and four
    members in lexicographic combination order
    """
    kinds = list(BaseModelKind)
    return [
        ModelDescriptor(members)
        for size in range(1, len(kinds) + 1)
        for members in itertools.combinations(kinds, size)
    ]


def select_models(
    fusions: t.Optional[t.Iterable[t.Union[str, t.Sequence]]] = None,
) -> t.List[ModelDescriptor]:
    """The descriptors to evaluate: all 15 by default, otherwise the requested models plus the
    single models they are made of, in :func:`enumerate_models` order. A request naming one
    kind selects that single model only
    """
    everything = enumerate_models()
    if not fusions:
        return everything
    wanted = set()
    for fusion in fusions:
        members = parse_members(fusion)
        if len(members) > 1:
            members = FusionSpec(members).members
        elif not members:
            raise InvalidParameter(f"empty model selection {fusion!r}")
        wanted.add(ModelDescriptor(tuple(sorted(members, key=list(BaseModelKind).index))).key)
        wanted.update(ModelDescriptor((kind,)).key for kind in members)
    return [descriptor for descriptor in everything if descriptor.key in wanted]


def evaluate_models(
    train: Dataset,
    test: Dataset,
    descriptors: t.Sequence[ModelDescriptor],
    grid: t.Sequence[int],
    seed: int = 0,
    leakage_mode: LeakageMode = LeakageMode.IN_SAMPLE,
    tree_grid: t.Optional[t.Mapping[str, t.Sequence]] = None,
    repository: t.Optional[ModelRepository] = None,
    n_jobs: int = 1,
) -> t.Tuple[t.List[EvaluatedModel], t.Dict[BaseModelKind, TrainedBase]]:
    """Tune the base models the descriptors need, then every requested fusion.

    Returns the models to score, in descriptor order, and the tuned bases.
    """
    repository = repository or default_repository()
    available = repository.kinds()
    requested = {kind for descriptor in descriptors for kind in descriptor.members}
    unknown = requested.difference(available)
    if unknown:
        raise UnknownModelKind(min(unknown, key=list(BaseModelKind).index))
    needed = [kind for kind in available if kind in requested]
    bases = {}
    for kind in needed:
        bases[kind] = tune_base(kind, train, test, grid, seed, repository, tree_grid, n_jobs)

    evaluated = []
    for descriptor in descriptors:
        if not descriptor.is_fusion:
            base = bases[descriptor.members[0]]
            evaluated.append(EvaluatedModel(descriptor.name, base.n_estimators, base.model))
            continue
        model, result = tune_fusion(
            train, test, descriptor.members, bases, grid, seed, leakage_mode, repository, n_jobs
        )
        evaluated.append(EvaluatedModel(descriptor.name, result.chosen, model))
    return evaluated, bases
