"""Dataset schema, CSV ingestion, sensor-grid aggregation and the seeded train/test split"""
from __future__ import annotations

import dataclasses
import datetime
import io
import logging
import math
import os
import re
import typing as t

import numpy as np
import pandas as pd

from .exceptions import (
    DataValidationError,
    EmptyDatasetError,
    InvalidParameter,
    ParseError,
    SchemaError,
)
from .helpers import make_rng
from .types import GrainRecord

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = ("warehouse_temp", "warehouse_humidity", "air_temp", "air_humidity")
TARGET_COLUMN = "grain_temp"
TIMESTAMP_COLUMN = "timestamp"
HUMIDITY_COLUMNS = ("warehouse_humidity", "air_humidity")
GRID_SHAPE = (7, 5, 4)

_TARGET_ALIASES = (TARGET_COLUMN, "avg_grain_temp")


def _frozen_array(values, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise InvalidParameter(f"expected a {ndim}-D array, got {array.ndim} dimensions")
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class Dataset:
    """A feature matrix with its target vector. Arrays are copied and made read-only on
    construction, so a ``Dataset`` never changes after it has been created.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: t.Tuple[str, ...] = None
    timestamps: t.Optional[t.Tuple[datetime.date, ...]] = None

    def __post_init__(self):
        features = _frozen_array(self.features, ndim=2)
        targets = _frozen_array(self.targets, ndim=1)
        n, d = features.shape
        if n == 0:
            raise EmptyDatasetError()
        if targets.shape[0] != n:
            raise InvalidParameter(f"{n} feature rows but {targets.shape[0]} targets")
        if not (np.isfinite(features).all() and np.isfinite(targets).all()):
            raise InvalidParameter("dataset contains non-finite values")
        names = self.feature_names
        names = tuple(f"x{j}" for j in range(d)) if names is None else tuple(names)
        if len(names) != d:
            raise InvalidParameter(f"{d} features but {len(names)} feature names")
        stamps = self.timestamps
        if stamps is not None:
            stamps = tuple(stamps)
            if len(stamps) != n:
                raise InvalidParameter(f"{n} rows but {len(stamps)} timestamps")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "timestamps", stamps)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def take(self, indices: t.Sequence[int]) -> Dataset:
        indices = np.asarray(indices, dtype=np.intp)
        stamps = None
        if self.timestamps is not None:
            stamps = tuple(self.timestamps[i] for i in indices)
        return Dataset(self.features[indices], self.targets[indices], self.feature_names, stamps)

    def with_features(self, features: np.ndarray, feature_names: t.Sequence[str]) -> Dataset:
        """Same rows and targets, different feature columns"""
        return Dataset(features, self.targets, tuple(feature_names), self.timestamps)

    def records(self) -> t.Iterator[GrainRecord]:
        if tuple(self.feature_names) != FEATURE_COLUMNS:
            raise SchemaError("records are only defined for the grain feature schema")
        stamps = self.timestamps or (None,) * self.n
        for stamp, row, target in zip(stamps, self.features, self.targets):
            yield GrainRecord(stamp, *map(float, row), float(target))

    @classmethod
    def from_records(cls, records: t.Iterable[GrainRecord]) -> Dataset:
        records = list(records)
        if not records:
            raise EmptyDatasetError()
        for row, record in enumerate(records, start=1):
            _check_humidity(row, record._asdict())
        stamps = tuple(r.timestamp for r in records)
        return cls(
            features=[[getattr(r, name) for name in FEATURE_COLUMNS] for r in records],
            targets=[r.avg_grain_temp for r in records],
            feature_names=FEATURE_COLUMNS,
            timestamps=None if any(s is None for s in stamps) else stamps,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class SensorGrid:
    """One day of readings from the 7 x 5 x 4 grain-pile thermometer grid (x, y, layer z)"""

    readings: np.ndarray

    def __post_init__(self):
        readings = _frozen_array(self.readings, ndim=3)
        if readings.shape != GRID_SHAPE:
            raise InvalidParameter(
                f"sensor grid must have shape {GRID_SHAPE}, got {readings.shape}"
            )
        if not np.isfinite(readings).all():
            raise InvalidParameter("sensor grid contains non-finite readings")
        object.__setattr__(self, "readings", readings)

    def layer_means(self) -> np.ndarray:
        return self.readings.mean(axis=(0, 1))


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidParameter(
                f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}"
            )
        if self.seed < 0:
            raise InvalidParameter(f"seed must be non-negative, got {self.seed}")


class FeatureTable(t.NamedTuple):
    """Rows read by :func:`load_features`. ``targets`` is ``None`` without a target column"""

    features: np.ndarray
    timestamps: t.Optional[t.Tuple[datetime.date, ...]]
    targets: t.Optional[np.ndarray]

    @property
    def n(self) -> int:
        return self.features.shape[0]


def _decode(path: t.Union[str, os.PathLike]) -> str:
    with open(path, "rb") as f:
        raw = f.read()
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        # rows before the bad byte, the header line not counted
        row = raw[: e.start].count(b"\n") or None
        where = f"row {row}" if row else "header"
        raise ParseError(f"{path}: {where}: not UTF-8 text", row=row) from e


def _read_frame(path: t.Union[str, os.PathLike]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(io.StringIO(_decode(path)), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise EmptyDatasetError(f"{path}: empty dataset") from e
    except pd.errors.ParserError as e:
        # pandas counts file lines from 1, header included
        match = re.search(r"line (\d+)", str(e))
        row = int(match.group(1)) - 1 if match else None
        where = f"row {row}: " if row else ""
        raise ParseError(f"{path}: {where}malformed CSV record", row=row) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _read_table(path: t.Union[str, os.PathLike], require_target: bool) -> FeatureTable:
    frame = _read_frame(path)

    target_column = next((c for c in _TARGET_ALIASES if c in frame.columns), None)
    missing = [c for c in FEATURE_COLUMNS if c not in frame.columns]
    if target_column is None and require_target:
        missing.append(TARGET_COLUMN)
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise EmptyDatasetError(f"{path}: empty dataset")

    numeric = {}
    columns = FEATURE_COLUMNS + ((target_column,) if target_column else ())
    for column in columns:
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            row = int(bad[0]) + 1
            raise ParseError(
                f"{path}: row {row}, column {column}: {raw.iloc[bad[0]]!r} is not a finite number",
                row=row,
                column=column,
            )
        numeric[column] = values

    for column in HUMIDITY_COLUMNS:
        values = numeric[column]
        bad = np.flatnonzero((values < 0.0) | (values > 100.0))
        if bad.size:
            row = int(bad[0]) + 1
            raise DataValidationError(
                f"{path}: row {row}, column {column}: humidity {values[bad[0]]} outside [0, 100]",
                row=row,
                column=column,
            )

    stamps = None
    if TIMESTAMP_COLUMN in frame.columns:
        parsed = pd.to_datetime(
            frame[TIMESTAMP_COLUMN].str.strip(), format="%Y-%m-%d", errors="coerce"
        )
        bad = np.flatnonzero(parsed.isna().to_numpy())
        if bad.size:
            row = int(bad[0]) + 1
            raise ParseError(
                f"{path}: row {row}, column {TIMESTAMP_COLUMN}: not an ISO-8601 date",
                row=row,
                column=TIMESTAMP_COLUMN,
            )
        stamps = tuple(ts.date() for ts in parsed)

    return FeatureTable(
        features=np.column_stack([numeric[c] for c in FEATURE_COLUMNS]),
        timestamps=stamps,
        targets=numeric[target_column] if target_column else None,
    )


def load_csv(path: t.Union[str, os.PathLike]) -> Dataset:
    """Read grain telemetry from a CSV file.

    The header must contain the four feature columns and ``grain_temp``; ``timestamp`` is
    optional and is kept as metadata only. Row order is preserved. Any cell that is empty,
    non-numeric or non-finite is rejected, there is no imputation.

    :raises SchemaError: a required column is missing
    :raises EmptyDatasetError: the file is empty or has a header but no rows
    :raises ParseError: the file is not UTF-8 CSV, or a cell is not a finite number (or not an
        ISO date for ``timestamp``)
    :raises DataValidationError: a humidity lies outside [0, 100]
    """
    table = _read_table(path, require_target=True)
    dataset = Dataset(
        features=table.features,
        targets=table.targets,
        feature_names=FEATURE_COLUMNS,
        timestamps=table.timestamps,
    )
    logger.info("Loaded %d rows from %s", dataset.n, path)
    return dataset


def load_features(path: t.Union[str, os.PathLike]) -> FeatureTable:
    """Like :func:`load_csv`, for rows to predict: the target column may be absent"""
    table = _read_table(path, require_target=False)
    logger.info("Loaded %d feature rows from %s", table.n, path)
    return table


def write_csv(dataset: Dataset, path: t.Union[str, os.PathLike]) -> None:
    """Write a dataset in the ingestion schema understood by :func:`load_csv`"""
    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    frame[TARGET_COLUMN] = dataset.targets
    if dataset.timestamps is not None:
        frame.insert(0, TIMESTAMP_COLUMN, [stamp.isoformat() for stamp in dataset.timestamps])
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.6f", lineterminator="\n")
    logger.info("Wrote %d rows to %s", dataset.n, path)


def aggregate_sensor_grid(grid: SensorGrid) -> float:
    """Average grain temperature of one grid reading.

    Every layer holds the same number of sensors (7 x 5 = 35), so the mean of the four layer
    means equals the plain mean over all 140 readings; the latter is what is computed.
    """
    return float(np.mean(grid.readings))


def split_indices(n: int, spec: SplitSpec) -> t.Tuple[np.ndarray, np.ndarray]:
    """Shuffle ``0..n-1`` with the PCG64 stream of ``spec.seed`` and cut after
    ``floor(train_fraction * n)`` positions
    """
    if n < 2:
        raise InvalidParameter(f"need at least 2 rows to form a train and a test set, got {n}")
    n_train = math.floor(spec.train_fraction * n)
    if n_train < 1 or n_train >= n:
        raise InvalidParameter(
            f"train_fraction {spec.train_fraction} leaves an empty partition for {n} rows"
        )
    permutation = make_rng(spec.seed).permutation(n)
    return permutation[:n_train], permutation[n_train:]


def train_test_split(data: Dataset, spec: SplitSpec = SplitSpec()) -> t.Tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(data.n, spec)
    logger.debug("Split %d rows into %d train / %d test", data.n, train_idx.size, test_idx.size)
    return data.take(train_idx), data.take(test_idx)


def _check_humidity(row: int, values: t.Mapping[str, float]) -> None:
    for column in HUMIDITY_COLUMNS:
        if not 0.0 <= values[column] <= 100.0:
            raise DataValidationError(
                f"row {row}, column {column}: humidity {values[column]} outside [0, 100]",
                row=row,
                column=column,
            )
