class AppError(Exception):
    """Base exception for the application."""


class ConfigurationError(AppError):
    """Raised when there is a configuration error."""


class CapExceededError(ConfigurationError):
    """Raised when a desk-scale size cap is exceeded without an explicit override."""


class ValidationError(AppError):
    """Raised when data validation fails."""


class DimensionMismatchError(ValidationError):
    """Raised when points of different dimensions are combined."""


class DegenerateGeometryError(ValidationError):
    """Raised when a lune, angle or threshold is undefined for the given points."""


class DuplicatePointsError(ValidationError):
    """Raised when a dataset contains two identical points."""


class CalculationError(AppError):
    """Raised when a mathematical calculation fails."""


class GraphFormatError(AppError):
    """Raised when a graph, conflict or vector file cannot be decoded."""


class ChecksumMismatchError(AppError):
    """Raised when a graph or conflict map is paired with a different dataset."""


class PreconditionError(AppError):
    """Raised when an operation is invoked outside its documented precondition."""


class NotLocalMinimumError(PreconditionError):
    """Raised when conflict search starts from a node that is not a local minimum."""


class MissingConflictsError(PreconditionError):
    """Raised when an operation requires a conflict map that was not supplied."""
