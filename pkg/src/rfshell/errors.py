"""Exception types raised across the package."""


class RfShellError(Exception):
    """Base class for physics/runtime errors (CLI exit code 2)."""


class DomainError(RfShellError, ValueError):
    pass


class CalibrationError(RfShellError):
    pass


class NoShellError(RfShellError):
    pass


class CharacterizationError(RfShellError):
    """Raised when a trap minimum cannot be bracketed.

    The scanned z-profile is attached as ``profile`` (tuple of arrays z, U).
    """

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class SaddlePointError(RfShellError):
    pass


class DegenerateGradientError(RfShellError):
    pass


class StepSizeError(RfShellError):
    pass


class EmptyCloudError(RfShellError):
    pass
