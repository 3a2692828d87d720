import typing as t

import numpy as np

from .exceptions import DimensionMismatch, InvalidParameter

DEFAULT_GRID_SPEC = "1-30,35-300:5"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``, optionally split off into sub-stream ``stream``.

    Sub-streams are derived with :class:`numpy.random.SeedSequence` using ``stream`` as spawn
    key, so ``make_rng(seed, b)`` is the same generator as the ``b``-th child spawned from
    ``SeedSequence(seed)``, no matter how many other streams exist or in which process they are
    consumed.
    """
    if seed < 0:
        raise InvalidParameter(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.PCG64(sequence))


def as_feature_matrix(x, n_features: t.Optional[int] = None) -> np.ndarray:
    """Coerce a row or a matrix to a 2-D float array and check its width"""
    matrix = np.asarray(x, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D feature matrix, got {matrix.ndim} dimensions")
    if n_features is not None and matrix.shape[1] != n_features:
        raise DimensionMismatch(
            f"model was fitted on {n_features} features, got rows of length {matrix.shape[1]}"
        )
    return matrix


def weighted_median(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Row-wise weighted median of ``values`` (n_rows x n_members) under member ``weights``.

    The median is the smallest value whose cumulative weight reaches half of the total weight.
    """
    values = np.atleast_2d(values)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(values, axis=1, kind="stable")
    cumulative = np.cumsum(weights[order], axis=1)
    reached = cumulative >= 0.5 * cumulative[:, -1:]
    median_index = reached.argmax(axis=1)
    rows = np.arange(values.shape[0])
    return values[rows, order[rows, median_index]]


def parse_grid(spec: t.Union[str, t.Iterable[int]]) -> t.List[int]:
    """Parse a tuning grid such as ``"1-30,35-300:5"`` into a sorted list of unique integers.

    Items are ``N``, ``A-B`` (inclusive) or ``A-B:STEP``. Iterables of integers are accepted as
    they are.
    """
    if not isinstance(spec, str):
        values = [int(v) for v in spec]
    else:
        values = []
        for item in filter(None, (part.strip() for part in spec.split(","))):
            try:
                values.extend(_parse_grid_item(item))
            except ValueError as e:
                raise InvalidParameter(f"invalid grid item {item!r}") from e
    if not values:
        raise InvalidParameter("tuning grid is empty")
    if min(values) < 1:
        raise InvalidParameter(f"grid values must be positive, got {min(values)}")
    return sorted(set(values))


def _parse_grid_item(item: str) -> t.List[int]:
    span, _, step = item.partition(":")
    start, _, stop = span.partition("-")
    if not stop:
        if step:
            raise ValueError(item)
        return [int(start)]
    step_size = int(step) if step else 1
    if step_size < 1 or int(stop) < int(start):
        raise ValueError(item)
    return list(range(int(start), int(stop) + 1, step_size))
