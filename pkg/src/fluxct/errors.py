"""Exception types shared across the package."""


class FluxCTError(Exception):
    """Base class for all package errors."""


class DataError(FluxCTError, ValueError):
    """Malformed or unusable input data (files, tables, images)."""


class FormatError(DataError):
    """A text file failed to parse."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericError(FluxCTError, ArithmeticError):
    """A numeric contract could not be honoured (degenerate input, undefined value)."""


class AttenuationRangeError(NumericError, ValueError):
    """Requested energy lies outside the tabulated attenuation range."""


class DegenerateFitError(NumericError):
    """Negative binomial fit is undefined (variance <= mean)."""


class InsufficientMatchesError(NumericError):
    """An entropy estimator found no template matches and is undefined."""
