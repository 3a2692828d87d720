"""Regression scores and the model comparison report"""
from __future__ import annotations

import dataclasses
import logging
import typing as t

import numpy as np

from .datamodel import Dataset
from .exceptions import DimensionMismatch, EmptyDatasetError, InvalidParameter, UndefinedMetric

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("Model", "n_estimators", "MSE", "R²")


def _pair(y_true, y_pred, minimum: int) -> t.Tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(f"{y_true.size} true values but {y_pred.size} predictions")
    if y_true.size == 0:
        raise EmptyDatasetError("cannot score empty vectors")
    if y_true.size < minimum:
        raise InvalidParameter(f"need at least {minimum} values, got {y_true.size}")
    return y_true, y_pred


def mse(y_true, y_pred) -> float:
    """Mean squared error"""
    y_true, y_pred = _pair(y_true, y_pred, minimum=1)
    residual = y_true - y_pred
    return float(np.dot(residual, residual) / residual.size)


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination, with the mean of ``y_true`` as the baseline.

    :raises UndefinedMetric: ``y_true`` is constant
    """
    y_true, y_pred = _pair(y_true, y_pred, minimum=2)
    centered = y_true - y_true.mean()
    total = float(np.dot(centered, centered))
    if total == 0.0:
        raise UndefinedMetric("R² is undefined for a constant target")
    residual = y_true - y_pred
    return 1.0 - float(np.dot(residual, residual)) / total


@dataclasses.dataclass(frozen=True)
class EvalRow:
    model_name: str
    n_estimators: t.Optional[int]
    mse: float
    r2: float

    def __post_init__(self):
        if self.mse < 0:
            raise InvalidParameter(f"mse must be non-negative, got {self.mse}")
        if self.r2 > 1:
            raise InvalidParameter(f"r2 cannot exceed 1, got {self.r2}")

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "n_estimators": self.n_estimators,
            "mse": self.mse,
            "r2": self.r2,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EvalRow:
        return cls(data["model"], data["n_estimators"], data["mse"], data["r2"])


class EvaluatedModel(t.NamedTuple):
    """A fitted model ready to be scored, with the n_estimators to show in the report (``None``
    for models that have no such parameter)
    """

    name: str
    n_estimators: t.Optional[int]
    model: t.Any


@dataclasses.dataclass(frozen=True)
class EvalReport:
    rows: t.Tuple[EvalRow, ...]
    split: t.Dict[str, t.Any] = dataclasses.field(default_factory=dict)
    seed: int = 0
    predictions: t.Dict[str, np.ndarray] = dataclasses.field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        names = [row.model_name for row in self.rows]
        if len(set(names)) != len(names):
            raise InvalidParameter("report rows must have unique model names")
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self):
        return len(self.rows)

    def row(self, model_name: str) -> EvalRow:
        for row in self.rows:
            if row.model_name == model_name:
                return row
        raise KeyError(model_name)

    def sorted_by_mse(self) -> EvalReport:
        rows = sorted(self.rows, key=lambda row: row.mse)
        return dataclasses.replace(self, rows=tuple(rows))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "split": dict(self.split),
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> EvalReport:
        rows = tuple(EvalRow.from_dict(row) for row in data["rows"])
        return cls(rows, dict(data.get("split", {})), data.get("seed", 0))


def build_report(
    models: t.Iterable[EvaluatedModel],
    test: Dataset,
    split: t.Optional[dict] = None,
    seed: int = 0,
) -> EvalReport:
    """Score every model on ``test``; one row per model, in the given order"""
    rows, predictions = [], {}
    for evaluated in models:
        predicted = np.asarray(evaluated.model.predict(test.features), dtype=np.float64)
        predictions[evaluated.name] = predicted
        rows.append(
            EvalRow(
                evaluated.name,
                evaluated.n_estimators,
                mse(test.targets, predicted),
                r_squared(test.targets, predicted),
            )
        )
        logger.info("%s: MSE %.4f, R² %.4f", evaluated.name, rows[-1].mse, rows[-1].r2)
    return EvalReport(tuple(rows), dict(split or {}), seed, predictions)


def format_report(report: EvalReport) -> str:
    """Aligned plain-text table with the columns Model, n_estimators, MSE and R²"""
    cells = [
        (
            row.model_name,
            "-" if row.n_estimators is None else str(row.n_estimators),
            f"{row.mse:.4f}",
            f"{row.r2:.4f}",
        )
        for row in report.rows
    ]
    table = [REPORT_COLUMNS] + cells
    widths = [max(len(line[i]) for line in table) for i in range(len(REPORT_COLUMNS))]
    lines = [_format_line(line, widths) for line in table]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def _format_line(values: t.Sequence[str], widths: t.Sequence[int]) -> str:
    first, *rest = zip(values, widths)
    return "  ".join([first[0].ljust(first[1])] + [value.rjust(width) for value, width in rest])
