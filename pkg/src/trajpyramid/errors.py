"""Exception hierarchy shared by every module of the package."""


class TrajPyramidError(Exception):
    """Base class for all package errors."""


class ShapeError(TrajPyramidError, ValueError):
    pass


class NumericError(TrajPyramidError, ArithmeticError):
    """A forward value or loss became non-finite."""

    def __init__(self, message: str, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class InsufficientKnots(TrajPyramidError, ValueError):
    pass


class NonMonotonicTimes(TrajPyramidError, ValueError):
    pass


class OutOfRange(TrajPyramidError, ValueError):
    pass


class EmptySequence(TrajPyramidError, ValueError):
    pass


class InvalidLength(TrajPyramidError, ValueError):
    pass


class ConfigError(TrajPyramidError, ValueError):
    pass


class EmptyScene(TrajPyramidError, ValueError):
    pass


class ParseError(TrajPyramidError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DuplicateObservation(TrajPyramidError, ValueError):
    pass


class InvalidK(TrajPyramidError, ValueError):
    pass


class CheckpointError(TrajPyramidError):
    pass
