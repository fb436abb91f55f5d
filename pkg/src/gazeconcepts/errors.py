"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
data problems exit 2, I/O problems exit 3.
"""


class GazeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GazeError):
    """Invalid parameters, unsatisfiable requests, or bad usage."""


class DataError(GazeError):
    """Input data violates a documented contract."""


class FormatError(DataError):
    """A file is structurally malformed (header, column count, ...)."""


class AlignmentError(DataError):
    """An attribution map does not match the window it references."""


class SizeError(DataError):
    """An input is too short for the requested operation."""


class DegenerateDataError(DataError):
    """Data carries no usable signal (all missing, zero variance, ...)."""


class EmptyConceptError(GazeError):
    """A concept segmentation is empty; influence is undefined for it."""
