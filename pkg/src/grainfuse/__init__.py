__version__ = "0.1.0"

from .datamodel import (  # noqa: E402
    Dataset,
    SensorGrid,
    SplitSpec,
    aggregate_sensor_grid,
    load_csv,
    load_features,
    train_test_split,
    write_csv,
)
from .ensemble import (  # noqa: E402
    ForestParams,
    fit_adaboost_classifier,
    fit_adaboost_r2,
    fit_extra_trees,
    fit_random_forest,
    predict_forest,
)
from .fusion import (  # noqa: E402
    FusionSpec,
    LeakageMode,
    enumerate_models,
    fit_fusion,
    stack_features,
    tune_n_estimators,
)
from .importance import forest_importance, tree_importance  # noqa: E402
from .metrics import mse, r_squared  # noqa: E402
from .repository import ModelRepository, default_repository  # noqa: E402
from .synth import SynthConfig, generate, generate_sensor_day  # noqa: E402
from .tree import TreeParams, best_split, fit_tree, predict_tree  # noqa: E402
from .types import BaseModelKind  # noqa: E402

__all__ = [
    "Dataset",
    "SensorGrid",
    "SplitSpec",
    "aggregate_sensor_grid",
    "load_csv",
    "load_features",
    "train_test_split",
    "write_csv",
    "ForestParams",
    "fit_adaboost_classifier",
    "fit_adaboost_r2",
    "fit_extra_trees",
    "fit_random_forest",
    "predict_forest",
    "FusionSpec",
    "LeakageMode",
    "enumerate_models",
    "fit_fusion",
    "stack_features",
    "tune_n_estimators",
    "forest_importance",
    "tree_importance",
    "mse",
    "r_squared",
    "ModelRepository",
    "default_repository",
    "SynthConfig",
    "generate",
    "generate_sensor_day",
    "TreeParams",
    "best_split",
    "fit_tree",
    "predict_tree",
    "BaseModelKind",
]
