class GrainFuseError(Exception):
    """Base class for every error raised by :mod:`grainfuse`"""

    pass


class SchemaError(GrainFuseError, ValueError):
    """Raised when a CSV file or a serialized model does not have the expected layout, for
    example a missing column or an unknown model format version
    """

    pass


class ParseError(GrainFuseError, ValueError):
    """Raised when a CSV cell cannot be read as a finite number. ``row`` is the 1-based data row
    (the header is not counted) and ``column`` the column name
    """

    def __init__(self, message: str, row: int = None, column: str = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DataValidationError(ParseError):
    """Raised when a value parses fine but lies outside its physical range, such as a humidity
    above 100 %RH
    """

    pass


class EmptyDatasetError(GrainFuseError, ValueError):
    """Raised when a dataset has no rows"""

    def __init__(self, message: str = "empty dataset"):
        super().__init__(message)


class DimensionMismatch(GrainFuseError, ValueError):
    """Raised when a feature row does not have the number of features a model was fitted on"""

    pass


class InvalidParameter(GrainFuseError, ValueError):
    """Raised when a parameter object or function argument violates its invariants"""

    pass


class UndefinedMetric(GrainFuseError, ValueError):
    """Raised when a score is mathematically undefined for the given input, such as R² on a
    constant target vector
    """

    pass


class NoSplitsError(GrainFuseError, RuntimeError):
    """Raised when feature importance is requested from a forest whose trees are all single
    leaves, so there is no impurity decrease to attribute
    """

    def __init__(self, message: str = "no splits to attribute"):
        super().__init__(message)


class UnknownModelKind(GrainFuseError, KeyError):
    """Raised when the :class:`~grainfuse.repository.ModelRepository` is asked for a model kind
    that has not been registered
    """

    pass
