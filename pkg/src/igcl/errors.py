"""Exception types raised across the package."""


class IGCLError(Exception):
    """Base class for all package errors."""


class MalformedCsv(IGCLError):
    pass


class EmptySeries(IGCLError):
    pass


class OutOfRange(IGCLError):
    pass


class MissingLabels(IGCLError):
    pass


class ShapeMismatch(IGCLError, ValueError):
    pass


class BadRange(IGCLError, ValueError):
    pass


class NonPositiveSigma(IGCLError, ValueError):
    pass


class InsufficientHistory(IGCLError):
    pass


class OverlapError(IGCLError, ValueError):
    pass


class NonFiniteLoss(IGCLError, FloatingPointError):
    """Raised when the training objective stops being finite."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedVersion(IGCLError):
    pass


class CorruptCheckpoint(IGCLError):
    pass


class EmptyScores(IGCLError):
    pass


class LengthMismatch(IGCLError, ValueError):
    pass


class SingleClass(IGCLError, ValueError):
    pass


class ConfigError(IGCLError, ValueError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
