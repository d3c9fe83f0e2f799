"""Exception types raised by the engines and the command-line driver."""


class QCDuffingError(Exception):
    """Base class for every error raised by this package."""


class TrajectoryEscaped(QCDuffingError):
    """A trajectory left the physical region (|x| > 100/beta) or went non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class BasisDimensionError(QCDuffingError):
    """A quantum state does not fit in the requested number basis."""

    def __init__(self, message, suggested_n=None):
        super().__init__(message)
        self.suggested_n = suggested_n


class CapacityError(QCDuffingError):
    """The requested basis dimension exceeds the configured maximum."""


class ConfigError(QCDuffingError):
    """Invalid command-line or config-file input."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class StabilityError(QCDuffingError):
    """The time step is too large for the explicit integrator at this basis size."""

    def __init__(self, message, suggested_steps=None):
        super().__init__(message)
        self.suggested_steps = suggested_steps
