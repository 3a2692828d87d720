"""Synthetic grain-storage telemetry.

Daily outside air temperature follows an annual sinusoid with weather noise. The warehouse
temperature is the outside temperature, lagged and smoothed by the building, plus a slowly
varying component of its own. Both humidities are noisy seasonal series clipped to [0, 100].
The average grain temperature is a linear combination of the standardized features with known
coefficients, so the importance ordering a model should find is planted in the data.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import typing as t

import numpy as np
import pandas as pd

from .datamodel import FEATURE_COLUMNS, GRID_SHAPE, Dataset, SensorGrid
from .exceptions import InvalidParameter
from .helpers import make_rng

logger = logging.getLogger(__name__)

#: order of :attr:`SynthConfig.coefficients`, strongest first
COEFFICIENT_ORDER = ("warehouse_temp", "air_temp", "warehouse_humidity", "air_humidity")
START_DATE = "2020-01-01"
#: stream key of the per-day sensor layout, kept apart from the daily series
_GRID_STREAM = 1


@dataclasses.dataclass(frozen=True)
class SynthConfig:
    n_days: int = 524
    seed: int = 0
    coefficients: t.Tuple[float, float, float, float] = (0.55, 0.25, 0.15, 0.05)
    noise_sd: float = 0.3
    period_days: float = 365.25
    air_temp_mean: float = 17.0
    air_temp_amplitude: float = 10.0
    air_temp_noise: float = 3.0
    warehouse_lag: int = 7
    warehouse_span: float = 15.0
    warehouse_buffer: float = 0.4
    warehouse_drift: float = 0.9
    warehouse_drift_noise: float = 1.5
    air_humidity_mean: float = 65.0
    air_humidity_amplitude: float = 10.0
    air_humidity_noise: float = 10.0
    warehouse_humidity_mean: float = 55.0
    warehouse_humidity_amplitude: float = 6.0
    warehouse_humidity_noise: float = 6.0
    grain_mean: float = 18.0
    grain_scale: float = 4.0
    vertical_gradient: float = 0.8

    def __post_init__(self):
        if self.n_days < 1:
            raise InvalidParameter(f"n_days must be >= 1, got {self.n_days}")
        if self.seed < 0:
            raise InvalidParameter(f"seed must be non-negative, got {self.seed}")
        coefficients = tuple(float(c) for c in self.coefficients)
        if len(coefficients) != len(COEFFICIENT_ORDER):
            raise InvalidParameter(f"expected 4 coefficients, got {len(coefficients)}")
        if any(c < 0 or not math.isfinite(c) for c in coefficients):
            raise InvalidParameter(f"coefficients must be non-negative, got {coefficients}")
        noise_fields = [f.name for f in dataclasses.fields(self) if f.name.endswith("_noise")]
        for name in ["noise_sd"] + noise_fields:
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.period_days <= 0:
            raise InvalidParameter(f"period_days must be positive, got {self.period_days}")
        if self.warehouse_lag < 0 or self.warehouse_span < 1:
            raise InvalidParameter("warehouse_lag must be >= 0 and warehouse_span >= 1")
        if not 0.0 <= self.warehouse_drift < 1.0:
            raise InvalidParameter(
                f"warehouse_drift must lie in [0, 1), got {self.warehouse_drift}"
            )
        object.__setattr__(self, "coefficients", coefficients)

    def coefficient(self, feature: str) -> float:
        return self.coefficients[COEFFICIENT_ORDER.index(feature)]


def _seasonal(day: np.ndarray, period: float, phase: float = 0.0) -> np.ndarray:
    return np.sin(2.0 * np.pi * day / period + phase)


def _standardize(values: np.ndarray) -> np.ndarray:
    spread = values.std()
    if spread == 0.0:
        return np.zeros_like(values)
    return (values - values.mean()) / spread


def _drift(rng: np.random.Generator, n: int, phi: float, scale: float) -> np.ndarray:
    """Stationary AR(1) series"""
    shocks = rng.normal(0.0, scale, size=n)
    series = np.empty(n)
    series[0] = shocks[0] / math.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        series[i] = phi * series[i - 1] + shocks[i]
    return series


def generate_frame(config: SynthConfig = SynthConfig()) -> pd.DataFrame:
    """The generated daily series as a frame indexed by date, with the grain temperature in
    ``grain_temp``
    """
    rng = make_rng(config.seed)
    n = config.n_days
    dates = pd.date_range(START_DATE, periods=n, freq="D")
    day = np.arange(n, dtype=np.float64)
    # coldest around mid January
    season = _seasonal(day - 105.0, config.period_days)

    air_temp = (
        config.air_temp_mean
        + config.air_temp_amplitude * season
        + rng.normal(0.0, config.air_temp_noise, size=n)
    )
    buffered = (
        pd.Series(air_temp)
        .shift(config.warehouse_lag, fill_value=air_temp[0])
        .ewm(span=config.warehouse_span, adjust=False)
        .mean()
        .to_numpy()
    )
    drift = _drift(rng, n, config.warehouse_drift, config.warehouse_drift_noise)
    warehouse_temp = (
        config.air_temp_mean
        + config.warehouse_buffer * (buffered - config.air_temp_mean)
        + drift
    )

    humidity_season = _seasonal(day, config.period_days, phase=np.pi / 2.0)
    warehouse_humidity = np.clip(
        config.warehouse_humidity_mean
        + config.warehouse_humidity_amplitude * humidity_season
        + rng.normal(0.0, config.warehouse_humidity_noise, size=n),
        0.0,
        100.0,
    )
    air_humidity = np.clip(
        config.air_humidity_mean
        + config.air_humidity_amplitude * humidity_season
        + rng.normal(0.0, config.air_humidity_noise, size=n),
        0.0,
        100.0,
    )

    frame = pd.DataFrame(
        {
            "warehouse_temp": warehouse_temp,
            "warehouse_humidity": warehouse_humidity,
            "air_temp": air_temp,
            "air_humidity": air_humidity,
        },
        index=dates,
    )
    signal = sum(
        config.coefficient(name) * _standardize(frame[name].to_numpy())
        for name in COEFFICIENT_ORDER
    )
    frame["grain_temp"] = (
        config.grain_mean
        + config.grain_scale * signal
        + rng.normal(0.0, config.noise_sd, size=n)
    )
    return frame


def generate(config: SynthConfig = SynthConfig()) -> Dataset:
    """Generate ``config.n_days`` days of telemetry, starting 2020-01-01. The result only
    depends on ``config``
    """
    frame = generate_frame(config)
    dataset = Dataset(
        features=frame[list(FEATURE_COLUMNS)].to_numpy(),
        targets=frame["grain_temp"].to_numpy(),
        feature_names=FEATURE_COLUMNS,
        timestamps=tuple(stamp.date() for stamp in frame.index),
    )
    logger.info("Generated %d days of synthetic telemetry (seed %d)", dataset.n, config.seed)
    return dataset


def layer_offsets(gradient: float) -> np.ndarray:
    """Mean-free temperature offset per layer, ``gradient`` degrees apart from top to bottom"""
    n_layers = GRID_SHAPE[2]
    return gradient * (np.arange(n_layers) - (n_layers - 1) / 2.0)


def generate_sensor_day(config: SynthConfig, day: int) -> SensorGrid:
    """All 140 thermometer readings of one day.

    Every layer is offset from the day's grain temperature by :func:`layer_offsets`, and each
    reading deviates from its layer mean by a seeded spatial pattern that is scaled with the
    gradient and averages to zero within the layer. The mean of the grid is therefore the
    day's grain temperature.
    """
    if not 0 <= day < config.n_days:
        raise InvalidParameter(f"day must lie in [0, {config.n_days}), got {day}")
    grain_temp = float(generate_frame(config)["grain_temp"].iloc[day])
    pattern = make_rng(config.seed, _GRID_STREAM, day).normal(0.0, 0.25, size=GRID_SHAPE)
    pattern = pattern - pattern.mean(axis=(0, 1), keepdims=True)
    gradient = config.vertical_gradient
    readings = grain_temp + layer_offsets(gradient) + abs(gradient) * pattern
    return SensorGrid(readings)
