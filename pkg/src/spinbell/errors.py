"""Exception hierarchy shared by all modules."""


class SpinBellError(Exception):
    """Base class for every error raised by spinbell."""


class DimensionCapExceeded(SpinBellError):
    pass


class InvalidGeometry(SpinBellError):
    pass


class InvalidRegion(SpinBellError):
    pass


class RangeViolation(SpinBellError):
    pass


class ConvergenceFailure(SpinBellError):
    pass


class SiteCountMismatch(SpinBellError):
    pass


class OverlappingSupports(SpinBellError):
    pass


class NormViolation(SpinBellError):
    pass


class InvalidState(SpinBellError):
    pass


class InsufficientSamples(SpinBellError):
    pass


class AllSamplesFloored(InsufficientSamples):
    pass


class NonProductStart(SpinBellError):
    pass


class ZeroMargin(SpinBellError):
    pass


class ZeroDecay(SpinBellError):
    pass


class ShapeMismatch(SpinBellError):
    pass


class TooManyStrategies(SpinBellError):
    pass


class FormulaMismatch(SpinBellError):
    pass


class ConfigError(SpinBellError):
    """Invalid experiment configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NoConvergenceWarning(UserWarning):
    """A seesaw run hit ``max_iter`` before meeting its tolerance."""
