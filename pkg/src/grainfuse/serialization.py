"""JSON model files.

A model file is a JSON object ``{"format": "grainfuse-model", "version": 1, "kind": ...,
"model": ...}``. Floats are written by :mod:`json` with ``repr`` precision, so a reloaded model
predicts exactly what the saved one did.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import typing as t

import numpy as np

from .ensemble import BoostedClassifier, BoostedRegressor, Forest
from .exceptions import SchemaError
from .fusion import FusionModel, LeakageMode, TrainedBase
from .tree import RegressionTree, TreeParams
from .types import BaseModelKind

logger = logging.getLogger(__name__)

FORMAT = "grainfuse-model"
VERSION = 1

_SIMPLE_MODELS = {
    "tree": RegressionTree,
    "forest": Forest,
    "adaboost_r2": BoostedRegressor,
    "adaboost_classifier": BoostedClassifier,
}


def params_to_dict(params: t.Mapping[str, t.Any]) -> dict:
    out = dict(params)
    if isinstance(out.get("tree_params"), TreeParams):
        tree_params = dataclasses.asdict(out["tree_params"])
        tree_params["criterion"] = out["tree_params"].criterion.value
        out["tree_params"] = tree_params
    return out


def params_from_dict(data: t.Mapping[str, t.Any]) -> dict:
    out = dict(data)
    if isinstance(out.get("tree_params"), dict):
        out["tree_params"] = TreeParams(**out["tree_params"])
    return out


def _fusion_to_dict(model: FusionModel) -> dict:
    return {
        "leakage_mode": model.leakage_mode.value,
        "folds": None if model.folds is None else [fold.tolist() for fold in model.folds],
        "bases": [
            {
                "member": base.kind.value,
                "params": params_to_dict(base.params),
                "kind": kind_of(base.model),
                "model": base.model.to_dict(),
            }
            for base in model.bases
        ],
        "meta": model.meta.to_dict(),
    }


def _fusion_from_dict(data: dict) -> FusionModel:
    bases = tuple(
        TrainedBase(
            BaseModelKind(base["member"]),
            _SIMPLE_MODELS[base["kind"]].from_dict(base["model"]),
            params_from_dict(base["params"]),
        )
        for base in data["bases"]
    )
    folds = data.get("folds")
    if folds is not None:
        folds = tuple(np.asarray(fold, dtype=np.intp) for fold in folds)
    return FusionModel(
        bases, Forest.from_dict(data["meta"]), LeakageMode(data["leakage_mode"]), folds
    )


def kind_of(model) -> str:
    if isinstance(model, FusionModel):
        return "fusion"
    for kind, cls in _SIMPLE_MODELS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"cannot serialize objects of type {type(model).__name__}")


def model_to_dict(model) -> dict:
    kind = kind_of(model)
    body = _fusion_to_dict(model) if kind == "fusion" else model.to_dict()
    return {"format": FORMAT, "version": VERSION, "kind": kind, "model": body}


def model_from_dict(data: t.Mapping) -> t.Any:
    if not isinstance(data, t.Mapping) or data.get("format") != FORMAT:
        raise SchemaError(f"not a {FORMAT} document")
    if data.get("version") != VERSION:
        raise SchemaError(f"unsupported model file version {data.get('version')!r}")
    kind = data.get("kind")
    try:
        if kind == "fusion":
            return _fusion_from_dict(data["model"])
        if kind not in _SIMPLE_MODELS:
            raise SchemaError(f"unknown model kind {kind!r}")
        return _SIMPLE_MODELS[kind].from_dict(data["model"])
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f"malformed {kind} model: {e}") from e


def dump_model(model, path: t.Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f)
    logger.info("Saved %s model to %s", kind_of(model), path)


def load_model(path: t.Union[str, os.PathLike]):
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: not a JSON document ({e})") from e
    return model_from_dict(data)
