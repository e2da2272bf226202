"""Exception types shared across the package."""


class PsdSelectError(Exception):
    """Base class for all errors raised by psdselect."""


class DataError(PsdSelectError, ValueError):
    """Input data violates a structural or numeric invariant."""


class ParseError(DataError):
    """A dataset file could not be parsed.

    Carries the offending file and (1-based) line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(where + message)


class ConfigError(PsdSelectError, ValueError):
    """An estimator, selector, classifier or experiment configuration is invalid."""


class DegenerateInputError(PsdSelectError, ValueError):
    """The input carries no usable information (zero variance, collapsed classes)."""


class NumericError(PsdSelectError, ArithmeticError):
    """A linear-algebra step failed (singular matrix, failed eigendecomposition)."""


class SolverError(NumericError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message, gap=None):
        self.gap = gap
        super().__init__(message)
