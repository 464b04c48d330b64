"""Exception hierarchy shared by all diet modules."""


class DietError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DietError):
    """Operand shapes do not conform."""


class NonFiniteError(DietError):
    """A value that must be finite is NaN or infinite."""


class SpecError(DietError):
    """A configuration or argument violates its declared constraints."""


class PolicyError(DietError):
    """An augmentation policy cannot be applied to the given data."""


class TargetError(DietError):
    """A classification target is outside the valid class range."""


class DivergenceError(DietError):
    """Training produced a non-finite loss.

    Carries the global step at which the divergence was detected.
    """

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class ReportError(DietError):
    """Not enough data to build the requested report."""


class FormatError(DietError):
    """A serialized file does not match its documented byte format."""
