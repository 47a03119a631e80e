"""Exception hierarchy shared by all olcwa modules."""


class OlcwaError(ValueError):
    """Base class for every error raised by the library."""


class ZeroVector(OlcwaError):
    pass


class DimensionMismatch(OlcwaError):
    pass


class SingularSystem(OlcwaError):
    pass


class DegenerateBatch(OlcwaError):
    pass


class EmptyBatch(OlcwaError):
    pass


class OutOfDomain(OlcwaError):
    pass


class InsufficientHistory(OlcwaError):
    pass


class NotDrifting(OlcwaError):
    pass


class EmptyInput(OlcwaError):
    pass


class InvalidSchedule(OlcwaError):
    pass


class ConfigError(OlcwaError):
    pass
