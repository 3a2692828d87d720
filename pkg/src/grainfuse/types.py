import datetime
import enum
import typing as t


class BaseModelKind(str, enum.Enum):
    """The four base regressors that take part in fusion. The declaration order is the order
    used for report rows and fusion member lists
    """

    ADABOOST = "adaboost"
    DECISION_TREE = "decision_tree"
    EXTRA_TREES = "extra_trees"
    RANDOM_FOREST = "random_forest"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @property
    def has_n_estimators(self) -> bool:
        return self is not BaseModelKind.DECISION_TREE

    @classmethod
    def parse(cls, value: t.Union["BaseModelKind", str]) -> "BaseModelKind":
        if isinstance(value, cls):
            return value
        normalized = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        return cls(normalized)


_DISPLAY_NAMES = {
    BaseModelKind.ADABOOST: "Adaboost",
    BaseModelKind.DECISION_TREE: "Decision tree",
    BaseModelKind.EXTRA_TREES: "Extra trees",
    BaseModelKind.RANDOM_FOREST: "Random forest",
}


class GrainRecord(t.NamedTuple):
    timestamp: t.Optional[datetime.date]
    warehouse_temp: float
    warehouse_humidity: float
    air_temp: float
    air_humidity: float
    avg_grain_temp: float


class ModelInfo(t.NamedTuple):
    kind: BaseModelKind
    factory: t.Callable
    kwargs: t.Optional[dict] = None


class ModelDescriptor(t.NamedTuple):
    """One row of the model comparison: a single base model or a fusion of several"""

    members: t.Tuple[BaseModelKind, ...]

    @property
    def is_fusion(self) -> bool:
        return len(self.members) > 1

    @property
    def name(self) -> str:
        names = [kind.display_name for kind in self.members]
        return "-".join([names[0]] + [name.lower() for name in names[1:]])

    @property
    def key(self) -> str:
        return "+".join(kind.value for kind in self.members)


class Leaf(t.NamedTuple):
    value: float
    count: int
    impurity: float


class Internal(t.NamedTuple):
    feature_index: int
    threshold: float
    left: int
    right: int
    count: int
    impurity: float


class Split(t.NamedTuple):
    feature_index: int
    threshold: float
    impurity_decrease: float
