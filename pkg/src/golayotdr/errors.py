"""Exception hierarchy shared by all modules."""


class GolayOTDRError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(GolayOTDRError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(GolayOTDRError, ValueError):
    """A simulation or experiment configuration is inconsistent."""


class AlignmentError(ConfigurationError):
    """The symbol rate does not put FBG reflections on the symbol grid."""

    def __init__(self, message: str, granularity_hz: float, nearest_hz: tuple[float, ...]):
        super().__init__(message)
        self.granularity_hz = granularity_hz
        self.nearest_hz = nearest_hz


class PreconditionError(InvalidArgumentError):
    """Tap delays are incompatible with the probing scheme's perfect-estimation conditions."""


class UnsupportedSchemeError(InvalidArgumentError):
    """The operation is not defined for this modulation scheme."""


class DegenerateEstimateError(GolayOTDRError, ArithmeticError):
    """A Jones estimate has zero determinant, so no phase can be extracted."""


class ToneNotFoundError(GolayOTDRError, ValueError):
    """The requested tone does not dominate the spectrum of the selected row."""
