"""Exception types raised across the package."""


class PcnSimError(Exception):
    """Base class for every error raised by pcnsim."""


class ConfigError(PcnSimError, ValueError):
    pass


class PostconditionViolation(PcnSimError, AssertionError):
    """An accepted item pushed the state outside [-B, B]; indicates a policy bug."""


class TraceMismatch(PcnSimError, ValueError):
    pass


class DivisibilityError(PcnSimError, ValueError):
    pass


class RangeError(PcnSimError, ValueError):
    pass


class ModelError(PcnSimError, ValueError):
    pass


class NonIntegerInput(PcnSimError, ValueError):
    pass


class TooLong(PcnSimError, ValueError):
    pass


class InfeasibleComplement(PcnSimError):
    pass


class MissingAnnotations(PcnSimError, ValueError):
    pass


class ParseError(PcnSimError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MissingColumn(PcnSimError, ValueError):
    pass


class DataError(PcnSimError, ValueError):
    pass


class EmptyGraph(PcnSimError, ValueError):
    pass
