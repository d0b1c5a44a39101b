"""Exception hierarchy shared by all modules."""


class CodaError(ValueError):
    """Base class for every error raised by alphacoda."""


# compositional core
class NonPositiveEntry(CodaError):
    pass


class TooShort(CodaError):
    pass


class DimensionMismatch(CodaError):
    pass


class NegativeDetectionLimit(CodaError):
    """Inverse alpha-transform argument has a non-positive component."""


class DeltaTooLarge(CodaError):
    pass


# life tables
class MissingCell(CodaError):
    pass


class ExposureAllZero(CodaError):
    pass


class FitDiverged(CodaError):
    pass


class DataTooSparse(CodaError):
    pass


class AllZeroRow(CodaError):
    pass


class InvalidRate(CodaError):
    pass


# arima
class NonInvertible(CodaError):
    pass


class SeriesTooShort(CodaError):
    pass


# pipeline / tuning / evaluation
class GapInYears(CodaError):
    pass


class RowNotComposition(CodaError):
    pass


class RankTooLarge(CodaError):
    pass


class WrongLength(CodaError):
    pass


class ShapeMismatch(CodaError):
    pass


# ingest / config
class MalformedRow(CodaError):
    def __init__(self, lineno, line, reason=""):
        self.lineno = lineno
        msg = f"line {lineno}: cannot parse {line.strip()!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class MissingAgeLadder(CodaError):
    pass


class WindowNotCovered(CodaError):
    pass


class ConfigError(CodaError):
    pass
