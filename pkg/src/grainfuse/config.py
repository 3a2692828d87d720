"""Run configuration.

A config file is a YAML mapping whose keys are the long option names of the command line
(``seed``, ``train-fraction``, ``grid``, ...). A key that names a command and holds a mapping
applies to that command only. File values become click defaults, so options given on the
command line always win.
"""
from __future__ import annotations

import dataclasses
import os
import pathlib
import typing as t

import yaml

from .datamodel import SplitSpec
from .exceptions import InvalidParameter, SchemaError
from .fusion import LeakageMode, parse_members
from .helpers import DEFAULT_GRID_SPEC, parse_grid

COMMANDS = ("synth", "report", "importance", "train", "predict")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    input: t.Optional[pathlib.Path] = None
    out: t.Optional[pathlib.Path] = None
    seed: int = 0
    train_fraction: float = 0.7
    grid: t.Tuple[int, ...] = tuple(parse_grid(DEFAULT_GRID_SPEC))
    models: t.Tuple[str, ...] = ()
    leakage: LeakageMode = LeakageMode.IN_SAMPLE
    jobs: int = 1
    days: int = 524

    def __post_init__(self):
        for name in ("input", "out"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, pathlib.Path(value))
        object.__setattr__(self, "grid", tuple(parse_grid(self.grid)))
        object.__setattr__(self, "leakage", LeakageMode.parse(self.leakage))
        models = tuple(self.models or ())
        for model in models:
            parse_members(model)
        object.__setattr__(self, "models", models)
        if self.jobs == 0:
            raise InvalidParameter("jobs must be a non-zero integer")
        if self.days < 1:
            raise InvalidParameter(f"days must be >= 1, got {self.days}")
        # validates seed and train_fraction
        SplitSpec(self.train_fraction, self.seed)

    @property
    def split(self) -> SplitSpec:
        return SplitSpec(self.train_fraction, self.seed)

    @classmethod
    def from_options(cls, **options) -> RunConfig:
        """Build from click parameters, ignoring the ones that are not part of a run config"""
        names = {field.name for field in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in options.items() if k in names and v is not None})


def _option_name(key: str) -> str:
    return str(key).strip().replace("-", "_")


def _flatten(values: t.Mapping) -> dict:
    out = {}
    for key, value in values.items():
        if key in COMMANDS:
            continue
        # click takes a multiple option default as a list
        if _option_name(key) == "models" and isinstance(value, str):
            value = [value]
        out[_option_name(key)] = value
    return out


def load_config_file(path: t.Union[str, os.PathLike]) -> dict:
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise SchemaError(f"{path}: invalid YAML ({e})") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: the config file must hold a mapping")
    return data


def to_default_map(data: t.Mapping) -> t.Dict[str, dict]:
    """Per-command click ``default_map`` for a loaded config file"""
    shared = _flatten(data)
    default_map = {}
    for command in COMMANDS:
        section = data.get(command) or {}
        if not isinstance(section, dict):
            raise SchemaError(f"config section {command!r} must be a mapping")
        default_map[command] = {**shared, **_flatten(section)}
    return default_map
