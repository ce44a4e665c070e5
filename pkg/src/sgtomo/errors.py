"""Exception and warning types raised across the package."""


class TomographyError(Exception):
    """Base class for every error raised by sgtomo."""

    code = "TomographyError"


class InvalidDensityMatrix(TomographyError, ValueError):
    """A matrix failed one of the density-matrix conditions.

    ``magnitude`` holds the size of the violation (asymmetry, trace error or
    most negative eigenvalue).
    """

    code = "InvalidDensityMatrix"

    def __init__(self, message, magnitude):
        super().__init__(message)
        self.magnitude = float(magnitude)


class NotHermitian(InvalidDensityMatrix):
    code = "NotHermitian"


class TraceNotOne(InvalidDensityMatrix):
    code = "TraceNotOne"


class NegativeEigenvalue(InvalidDensityMatrix):
    code = "NegativeEigenvalue"


class DimensionMismatch(TomographyError, ValueError):
    code = "DimensionMismatch"


class MOutOfRange(TomographyError, ValueError):
    code = "MOutOfRange"


class AllZero(TomographyError, ValueError):
    code = "AllZero"


class RankDeficient(TomographyError):
    """The measurement matrix does not determine every density-matrix element.

    The conditioning report that triggered the refusal is kept on
    ``report``.
    """

    code = "RankDeficient"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AllEigenvaluesClipped(TomographyError):
    code = "AllEigenvaluesClipped"


class FactorizationFailed(TomographyError):
    code = "FactorizationFailed"


class NoConvergence(TomographyError):
    code = "NoConvergence"


class FitDiverged(TomographyError):
    code = "FitDiverged"


class PeakOverlapWarning(UserWarning):
    """Adjacent time-of-flight peaks are closer than three widths."""


class RecordMismatch(TomographyError, ValueError):
    """Measurement records do not line up with the axis set or spin."""

    code = "RecordMismatch"


class ParseError(TomographyError, ValueError):
    """An input file could not be read; ``line`` is 1-based when known."""

    code = "ParseError"

    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line
