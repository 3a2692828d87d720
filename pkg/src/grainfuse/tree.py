"""CART regression trees and the weighted decision stump used by discrete AdaBoost.

Trees are grown greedily. At every node the candidate thresholds of a feature are the midpoints
between consecutive distinct values, a sample goes left when ``x[feature] <= threshold`` and the
split with the largest impurity decrease wins. Ties go to the lowest feature index, then to the
smallest threshold. Grown trees are stored as flat node arrays, which keeps prediction vectorized
and makes the tree trivially serializable.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
import typing as t

import numpy as np

from .datamodel import Dataset
from .exceptions import DimensionMismatch, EmptyDatasetError, InvalidParameter
from .helpers import as_feature_matrix
from .types import Internal, Leaf, Split

logger = logging.getLogger(__name__)

_TIE_TOLERANCE = 1e-12
_NO_NODE = -1

Splitter = t.Callable[[np.ndarray, np.ndarray, "TreeParams"], t.Optional[Split]]


class Criterion(str, enum.Enum):
    SQUARED_ERROR = "squared_error"
    ABSOLUTE_ERROR = "absolute_error"


@dataclasses.dataclass(frozen=True)
class TreeParams:
    criterion: Criterion = Criterion.SQUARED_ERROR
    max_depth: t.Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "criterion", Criterion(self.criterion))
        except ValueError as e:
            raise InvalidParameter(f"unknown criterion {self.criterion!r}") from e
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidParameter(f"max_depth must be a positive integer, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise InvalidParameter(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise InvalidParameter(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")


def node_impurity(targets: np.ndarray, criterion: Criterion = Criterion.SQUARED_ERROR) -> float:
    """Variance of ``targets`` for squared error, mean absolute deviation from the median for
    absolute error
    """
    if Criterion(criterion) is Criterion.SQUARED_ERROR:
        return float(np.var(targets))
    return float(np.mean(np.abs(targets - np.median(targets))))


def leaf_value(targets: np.ndarray, criterion: Criterion = Criterion.SQUARED_ERROR) -> float:
    if Criterion(criterion) is Criterion.SQUARED_ERROR:
        return float(np.mean(targets))
    return float(np.median(targets))


def _midpoints(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    middle = 0.5 * (lower + upper)
    # adjacent floats can round the midpoint up onto the upper value
    return np.where(middle < upper, middle, lower)


def _scan_squared_error(xs, ys, min_leaf):
    n = ys.shape[0]
    centered = ys - ys.mean()
    csum = np.cumsum(centered)[:-1]
    csq = np.cumsum(centered * centered)[:-1]
    total_sum = centered.sum()
    total_sq = float(np.dot(centered, centered))
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    left_sse = csq - csum * csum / n_left
    right_sse = (total_sq - csq) - (total_sum - csum) ** 2 / n_right
    node_sse = total_sq - total_sum * total_sum / n
    return (node_sse - left_sse - right_sse) / n


def _scan_absolute_error(xs, ys, min_leaf):
    n = ys.shape[0]
    node = np.mean(np.abs(ys - np.median(ys)))
    decrease = np.full(n - 1, -np.inf)
    for i in range(n - 1):
        if xs[i] == xs[i + 1] or i + 1 < min_leaf or n - i - 1 < min_leaf:
            continue
        left, right = ys[: i + 1], ys[i + 1 :]
        left_mad = np.sum(np.abs(left - np.median(left)))
        right_mad = np.sum(np.abs(right - np.median(right)))
        decrease[i] = node - (left_mad + right_mad) / n
    return decrease


_SCANNERS = {
    Criterion.SQUARED_ERROR: _scan_squared_error,
    Criterion.ABSOLUTE_ERROR: _scan_absolute_error,
}


def best_split(
    features: np.ndarray, targets: np.ndarray, params: TreeParams = TreeParams()
) -> t.Optional[Split]:
    """Exhaustive CART split search over every feature and every midpoint threshold.

    Returns ``None`` when the targets are constant or when no threshold leaves at least
    ``params.min_samples_leaf`` samples on both sides.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = targets.shape[0]
    if n == 0:
        raise EmptyDatasetError("cannot search a split in an empty node")
    if n < 2 or np.all(targets == targets[0]):
        return None

    min_leaf = params.min_samples_leaf
    tolerance = _TIE_TOLERANCE * max(1.0, node_impurity(targets, params.criterion))
    scan = _SCANNERS[params.criterion]
    positions = np.arange(n - 1)
    best = None
    for feature in range(features.shape[1]):
        order = np.argsort(features[:, feature], kind="stable")
        xs, ys = features[order, feature], targets[order]
        legal = (xs[:-1] < xs[1:]) & (positions + 1 >= min_leaf) & (n - positions - 1 >= min_leaf)
        if not legal.any():
            continue
        decrease = np.where(legal, scan(xs, ys, min_leaf), -np.inf)
        top = decrease.max()
        pick = int(np.flatnonzero(decrease >= top - tolerance)[0])
        if best is None or decrease[pick] > best.impurity_decrease + tolerance:
            threshold = float(_midpoints(xs[pick], xs[pick + 1]))
            best = Split(feature, threshold, float(decrease[pick]))
    return best


def _partition_decrease(targets: np.ndarray, go_left: np.ndarray, criterion: Criterion) -> float:
    n = targets.shape[0]
    left, right = targets[go_left], targets[~go_left]
    return (
        node_impurity(targets, criterion)
        - left.shape[0] / n * node_impurity(left, criterion)
        - right.shape[0] / n * node_impurity(right, criterion)
    )


def random_split(
    features: np.ndarray,
    targets: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator,
) -> t.Optional[Split]:
    """Extremely randomized split: one threshold per feature, drawn uniformly from the open
    interval between the feature's minimum and maximum in the node, and the best scoring of
    those candidates.

    Constant features get no draw. A candidate that leaves fewer than ``min_samples_leaf``
    samples on either side is discarded.
    """
    n = targets.shape[0]
    if n < 2 or np.all(targets == targets[0]):
        return None
    min_leaf = params.min_samples_leaf
    tolerance = _TIE_TOLERANCE * max(1.0, node_impurity(targets, params.criterion))
    best = None
    for feature in range(features.shape[1]):
        column = features[:, feature]
        low, high = column.min(), column.max()
        if not low < high:
            continue
        threshold = rng.uniform(low, high)
        while not low < threshold < high:
            threshold = rng.uniform(low, high)
        go_left = column <= threshold
        n_left = int(go_left.sum())
        if n_left < min_leaf or n - n_left < min_leaf:
            continue
        decrease = _partition_decrease(targets, go_left, params.criterion)
        if best is None or decrease > best.impurity_decrease + tolerance:
            best = Split(feature, float(threshold), float(decrease))
    return best


@dataclasses.dataclass(frozen=True, eq=False)
class RegressionTree:
    """A fitted binary regression tree stored as parallel node arrays.

    Node 0 is the root. For a leaf ``feature[i] == -1`` and ``left[i] == right[i] == -1``.
    ``count`` and ``impurity`` hold the number of training samples routed to a node and their
    impurity under ``criterion``; they drive feature importance.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    impurity: np.ndarray
    n_features: int
    criterion: Criterion = Criterion.SQUARED_ERROR

    def __post_init__(self):
        for name, dtype in _NODE_ARRAYS.items():
            array = np.array(getattr(self, name), dtype=dtype)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_samples(self) -> int:
        return int(self.count[0])

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == _NO_NODE

    def node(self, index: int) -> t.Union[Leaf, Internal]:
        if self.is_leaf(index):
            return Leaf(
                float(self.value[index]), int(self.count[index]), float(self.impurity[index])
            )
        return Internal(
            int(self.feature[index]),
            float(self.threshold[index]),
            int(self.left[index]),
            int(self.right[index]),
            int(self.count[index]),
            float(self.impurity[index]),
        )

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == _NO_NODE)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.intp)
        for index in range(self.n_nodes):
            if not self.is_leaf(index):
                depths[self.left[index]] = depths[self.right[index]] = depths[index] + 1
        return int(depths.max())

    def apply(self, x) -> np.ndarray:
        """Index of the leaf every row of ``x`` ends up in"""
        matrix = as_feature_matrix(x, self.n_features)
        node = np.zeros(matrix.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] != _NO_NODE)
        while active.size:
            current = node[active]
            go_left = matrix[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != _NO_NODE]
        return node

    def predict(self, x) -> np.ndarray:
        return self.value[self.apply(x)]

    def dump(self, feature_names: t.Optional[t.Sequence[str]] = None) -> str:
        """Indented text rendering, meant for debugging"""
        names = feature_names or [f"x{j}" for j in range(self.n_features)]
        lines = []
        stack = [(0, 0, "")]
        while stack:
            index, depth, prefix = stack.pop()
            indent = "  " * depth
            node = self.node(index)
            if isinstance(node, Leaf):
                lines.append(f"{indent}{prefix}leaf value={node.value:.4f} count={node.count}")
                continue
            lines.append(
                f"{indent}{prefix}{names[node.feature_index]} <= {node.threshold:.4f}"
                f" (count={node.count}, impurity={node.impurity:.4f})"
            )
            stack.append((node.right, depth + 1, "else: "))
            stack.append((node.left, depth + 1, "then: "))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).tolist() for name in _NODE_ARRAYS}
        out.update(n_features=self.n_features, criterion=self.criterion.value)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RegressionTree:
        return cls(**data)


_NODE_ARRAYS = {
    "feature": np.intp,
    "threshold": np.float64,
    "left": np.intp,
    "right": np.intp,
    "value": np.float64,
    "count": np.intp,
    "impurity": np.float64,
}


def grow_tree(
    features: np.ndarray,
    targets: np.ndarray,
    params: TreeParams = TreeParams(),
    splitter: t.Optional[Splitter] = None,
) -> RegressionTree:
    """Grow a tree on raw arrays. ``splitter`` picks the split of a node and defaults to the
    exhaustive :func:`best_split`; growth stops at ``max_depth``, below ``min_samples_split``
    samples or when the splitter finds nothing
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape[0] == 0:
        raise EmptyDatasetError()
    splitter = splitter or best_split
    nodes = {name: [] for name in _NODE_ARRAYS}

    def add_node(indices):
        node_targets = targets[indices]
        nodes["feature"].append(_NO_NODE)
        nodes["threshold"].append(0.0)
        nodes["left"].append(_NO_NODE)
        nodes["right"].append(_NO_NODE)
        nodes["value"].append(leaf_value(node_targets, params.criterion))
        nodes["count"].append(indices.shape[0])
        nodes["impurity"].append(node_impurity(node_targets, params.criterion))
        return len(nodes["feature"]) - 1

    root_indices = np.arange(targets.shape[0])
    stack = [(add_node(root_indices), root_indices, 0)]
    while stack:
        node, indices, depth = stack.pop()
        if indices.shape[0] < params.min_samples_split:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        split = splitter(features[indices], targets[indices], params)
        if split is None:
            continue
        go_left = features[indices, split.feature_index] <= split.threshold
        left_indices, right_indices = indices[go_left], indices[~go_left]
        left, right = add_node(left_indices), add_node(right_indices)
        nodes["feature"][node] = split.feature_index
        nodes["threshold"][node] = split.threshold
        nodes["left"][node] = left
        nodes["right"][node] = right
        stack.append((right, right_indices, depth + 1))
        stack.append((left, left_indices, depth + 1))

    return RegressionTree(n_features=features.shape[1], criterion=params.criterion, **nodes)


def fit_tree(train: Dataset, params: TreeParams = TreeParams()) -> RegressionTree:
    tree = grow_tree(train.features, train.targets, params)
    logger.debug("Grew tree with %d nodes on %d samples", tree.n_nodes, train.n)
    return tree


def predict_tree(tree: RegressionTree, x) -> float:
    row = np.asarray(x, dtype=np.float64)
    if row.ndim != 1:
        raise DimensionMismatch("predict_tree takes a single feature row")
    return float(tree.predict(row)[0])


@dataclasses.dataclass(frozen=True)
class WeightedStump:
    """Depth-one classifier: ``polarity`` when ``x[feature_index] <= threshold``, otherwise
    ``-polarity``
    """

    feature_index: int
    threshold: float
    polarity: int

    def predict(self, x) -> np.ndarray:
        matrix = as_feature_matrix(x)
        if self.feature_index >= matrix.shape[1]:
            raise DimensionMismatch(f"stump splits feature {self.feature_index}")
        left = matrix[:, self.feature_index] <= self.threshold
        return np.where(left, self.polarity, -self.polarity).astype(np.float64)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        raise EmptyDatasetError()
    if not np.isin(labels, (-1.0, 1.0)).all():
        raise InvalidParameter("labels must be +1 or -1")
    return labels


def fit_stump(features: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> WeightedStump:
    """Stump with the lowest weighted 0-1 error under ``weights``.

    Candidate thresholds per feature are one value below the minimum (every sample goes right)
    followed by the midpoints of consecutive distinct values. Ties go to the lowest feature, the
    smallest threshold and polarity +1, in that order.
    """
    features = as_feature_matrix(features)
    labels = check_labels(labels)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != labels.shape or features.shape[0] != labels.shape[0]:
        raise DimensionMismatch("features, labels and weights must have the same length")
    if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidParameter("weights must be non-negative and sum to 1")

    best, best_error = None, np.inf
    for feature in range(features.shape[1]):
        order = np.argsort(features[:, feature], kind="stable")
        xs, ys, ws = features[order, feature], labels[order], weights[order]
        cum_pos = np.cumsum(np.where(ys > 0, ws, 0.0))
        cum_neg = np.cumsum(np.where(ys < 0, ws, 0.0))
        total_pos, total_neg = cum_pos[-1], cum_neg[-1]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        thresholds = np.concatenate([[xs[0] - 1.0], _midpoints(xs[cut], xs[cut + 1])])
        left_pos = np.concatenate([[0.0], cum_pos[cut]])
        left_neg = np.concatenate([[0.0], cum_neg[cut]])
        errors = np.column_stack(
            [left_neg + (total_pos - left_pos), left_pos + (total_neg - left_neg)]
        ).ravel()
        pick = int(np.flatnonzero(errors <= errors.min() + _TIE_TOLERANCE)[0])
        if errors[pick] < best_error - _TIE_TOLERANCE:
            best_error = errors[pick]
            best = WeightedStump(feature, float(thresholds[pick // 2]), 1 if pick % 2 == 0 else -1)
    return best
