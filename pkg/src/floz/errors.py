"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI:
    2 -> input / schema problems (SchemaError, ParseError, DomainError,
         ConfigurationError)
    3 -> numerical or training failures (NumericalError, TrainingError,
         DegenerateGeometryError, GeometryError)
    4 -> InsufficientCoverageError
"""


class FlozError(Exception):
    """Base class for all package errors."""


class ParseError(FlozError):
    """Malformed input file (carries a line number when available)."""


class SchemaError(FlozError):
    """Structurally valid input that violates the declared schema."""


class DomainError(FlozError):
    """Values outside the declared prior box or index ranges."""


class ConfigurationError(FlozError):
    """Inconsistent configuration (e.g. sharp edge on a periodic dim)."""


class DegenerateGeometryError(FlozError):
    """Rank-deficient sample covariance; a direction carries no variance."""


class GeometryError(FlozError):
    """Sampling geometry failure (e.g. rejection acceptance too low)."""


class NumericalError(FlozError):
    """Non-finite value encountered in a numerical computation."""


class TrainingError(FlozError):
    """Training aborted (carries epoch/batch context in the message)."""


class InsufficientCoverageError(FlozError):
    """Too few latent-space samples inside the trust ball."""

    def __init__(self, message: str, occupancy: float = 0.0):
        super().__init__(message)
        self.occupancy = occupancy
