class SlsError(Exception):
    """Base class for all package errors."""


class InvalidDataset(SlsError, ValueError):
    pass


class InvalidCovariance(SlsError, ValueError):
    pass


class ParseError(SlsError, ValueError):
    """Raised by the file loaders; carries the 1-based location when known."""

    def __init__(self, message, line=None, column=None):
        loc = []
        if line is not None:
            loc.append(f"row {line}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.column = column


class DimensionMismatch(SlsError, ValueError):
    pass


class InfeasibleFixings(SlsError, ValueError):
    pass


class NonConvergedRelaxation(SlsError, RuntimeError):
    pass


class InternalContradiction(SlsError, RuntimeError):
    """Both screening rules fired for one feature; the upper bound is below the relaxation."""


class InvalidK(SlsError, ValueError):
    pass


class BoundViolation(SlsError, ValueError):
    pass


class ProblemTooLarge(SlsError, ValueError):
    pass


class ConfigError(SlsError, ValueError):
    pass
