"""Exception types shared across the package."""


class IsosliceError(Exception):
    """Base class for every error this package raises on purpose."""


class FileFormatError(IsosliceError):
    """A file's magic, header, or structure is not what the format requires."""


class TruncatedPayloadError(FileFormatError):
    """A payload does not hold exactly the number of elements its header promises."""


class DataValidationError(IsosliceError):
    """Array contents break an invariant (non-finite intensities, stray class ids)."""


class ShapeError(IsosliceError):
    """Operands that must share dims or class count do not."""


class ParameterError(IsosliceError):
    """A parameter value is outside its documented range."""


class BoundsError(IsosliceError, IndexError):
    """A slice index is outside the volume."""


class DomainError(IsosliceError):
    """A value lies outside the mathematical domain of an evaluator."""


class UndefinedMetricError(IsosliceError):
    """The requested metric is undefined for these inputs (empty mask or surface)."""


class InsufficientSlicesError(IsosliceError):
    """The operation needs at least two slices along the stacking axis."""
