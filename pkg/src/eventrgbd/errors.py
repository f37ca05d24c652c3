"""Exception types raised across the package."""


class EventRGBDError(ValueError):
    """Base class for all errors raised by eventrgbd."""


class BehindCameraError(EventRGBDError):
    """A point lies at or behind the optical center of a pinhole model."""


class NoIntersectionError(EventRGBDError):
    """A ray is parallel to the plane it was intersected with."""


class BehindRayError(EventRGBDError):
    """The ray/plane intersection lies behind the ray origin."""


class DegenerateTriangulationError(EventRGBDError):
    """Two rays are (nearly) parallel and have no unique closest points."""


class PatternOverflowError(EventRGBDError):
    """Pattern features overlap or do not fit into the projector frame."""


class ScheduleGapError(EventRGBDError):
    """Irradiance slots handed to the sensor are not contiguous in time."""


class IncompleteCycleError(EventRGBDError):
    """An accumulation window does not contain a full R, G, B cycle."""


class InsufficientReferenceError(EventRGBDError):
    """A white-balance reference region has a zero mean in some channel."""


class DegenerateHistogramError(EventRGBDError):
    """A histogram has zero variance, so its correlation is undefined."""


class DimensionMismatchError(EventRGBDError):
    """Two images that must share a shape do not."""


class BudgetInfeasibleError(EventRGBDError):
    """No pattern on the ladder fits into the bandwidth budget."""


class FormatError(EventRGBDError):
    """A file does not follow the expected text or binary layout."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsortedStreamError(FormatError):
    """An event or trigger stream is not in canonical order."""


class ConfigError(EventRGBDError):
    """A run configuration file is malformed or names an unknown key."""
