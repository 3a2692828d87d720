"""Mean-decrease-impurity feature importance for trees and forests"""
from __future__ import annotations

import dataclasses
import typing as t

import numpy as np

from .ensemble import Forest
from .exceptions import InvalidParameter, NoSplitsError
from .tree import RegressionTree

BAR_WIDTH = 40


def tree_importance(tree: RegressionTree) -> np.ndarray:
    """Per-feature sum of the sample-weighted impurity decrease of every split.

    A node with ``n_node`` of the tree's ``n_total`` samples credits its split feature with
    ``(n_node·impurity(node) − n_left·impurity(left) − n_right·impurity(right)) / n_total``.
    A single-leaf tree yields the zero vector.
    """
    importances = np.zeros(tree.n_features)
    n_total = tree.n_samples
    for node in np.flatnonzero(tree.feature >= 0):
        left, right = tree.left[node], tree.right[node]
        decrease = (
            tree.count[node] * tree.impurity[node]
            - tree.count[left] * tree.impurity[left]
            - tree.count[right] * tree.impurity[right]
        ) / n_total
        importances[tree.feature[node]] += decrease
    return importances


@dataclasses.dataclass(frozen=True, eq=False)
class ImportanceReport:
    importances: np.ndarray
    feature_names: t.Tuple[str, ...]

    def __post_init__(self):
        importances = np.array(self.importances, dtype=np.float64)
        if importances.shape != (len(self.feature_names),):
            raise InvalidParameter("one importance per feature name is required")
        importances.setflags(write=False)
        object.__setattr__(self, "importances", importances)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def ranking(self) -> t.Tuple[int, ...]:
        """Feature indices by descending importance, ties by index"""
        return tuple(sorted(range(self.importances.size), key=lambda j: (-self.importances[j], j)))

    @property
    def ranked_names(self) -> t.Tuple[str, ...]:
        return tuple(self.feature_names[j] for j in self.ranking)

    def as_dict(self) -> t.Dict[str, float]:
        return {name: float(value) for name, value in zip(self.feature_names, self.importances)}

    def to_dict(self) -> dict:
        return {
            "features": [
                {"feature": self.feature_names[j], "importance": float(self.importances[j])}
                for j in self.ranking
            ]
        }


def forest_importance(
    forest: Forest, feature_names: t.Optional[t.Sequence[str]] = None
) -> ImportanceReport:
    """Average the raw importances of the member trees and normalize them to sum to one

    :raises NoSplitsError: every tree in the forest is a single leaf
    """
    names = feature_names or tuple(f"x{j}" for j in range(forest.n_features))
    total = np.zeros(forest.n_features)
    for tree in forest.trees:
        total = total + tree_importance(tree)
    average = total / forest.n_estimators
    norm = average.sum()
    if norm <= 0.0:
        raise NoSplitsError()
    return ImportanceReport(average / norm, tuple(names))


def format_bar_chart(report: ImportanceReport, width: int = BAR_WIDTH) -> str:
    """Horizontal bar chart of the ranked importances for terminal output"""
    label_width = max(len(name) for name in report.feature_names)
    top = max(float(report.importances.max()), 1e-300)
    lines = []
    for j in report.ranking:
        value = float(report.importances[j])
        bar = "#" * int(round(width * value / top))
        lines.append(f"{report.feature_names[j].ljust(label_width)}  {value:.4f}  {bar}")
    return "\n".join(lines) + "\n"
