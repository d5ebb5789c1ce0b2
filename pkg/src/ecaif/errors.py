"""Exception hierarchy shared by every ecaif module."""


class EcaifError(Exception):
    """Base class for all library errors."""


# core maths
class DegenerateDistribution(EcaifError, ValueError):
    pass


class InvalidWeight(EcaifError, ValueError):
    pass


class InvalidLogit(EcaifError, ValueError):
    pass


class AbsoluteContinuityViolation(EcaifError, ValueError):
    pass


class DimensionMismatch(EcaifError, ValueError):
    pass


# model construction
class ConfigurationError(EcaifError, ValueError):
    pass


class NotAController(EcaifError, ValueError):
    pass


class InvalidAction(EcaifError, ValueError):
    pass


# inference
class InvalidObservation(EcaifError, ValueError):
    pass


class InvalidHorizon(EcaifError, ValueError):
    pass


class NoPolicies(EcaifError, ValueError):
    pass


# world / runner
class InvalidFeature(EcaifError, KeyError):
    pass


class InvalidWhat(EcaifError, KeyError):
    pass


class ParseError(EcaifError, ValueError):
    """Scenario file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ParseError):
    """Scenario file parsed but describes an invalid configuration."""
