"""Exception hierarchy shared across the package."""


class EOCorruptError(Exception):
    """Base class for all errors raised by eocorrupt."""


class InvalidSeverity(EOCorruptError, ValueError):
    pass


class UnknownCorruption(EOCorruptError, ValueError):
    pass


class DecodeError(EOCorruptError):
    pass


class UnsupportedFormat(EOCorruptError, ValueError):
    pass


class EncodeError(EOCorruptError, ValueError):
    pass


class InvalidKernel(EOCorruptError, ValueError):
    pass


class GapOverflow(EOCorruptError, ValueError):
    pass


class UnsupportedAnnotation(EOCorruptError, TypeError):
    pass


class LayoutError(EOCorruptError):
    pass


class AnnotationParseError(EOCorruptError):
    pass


class ChainError(EOCorruptError, ValueError):
    pass


class IdMismatch(EOCorruptError, ValueError):
    pass


class ShapeMismatch(EOCorruptError, ValueError):
    pass


class ClassOutOfRange(EOCorruptError, ValueError):
    pass


class DegeneratePolygon(EOCorruptError, ValueError):
    pass


class ZeroCleanScore(EOCorruptError, ValueError):
    pass


class EmptyCellSet(EOCorruptError, ValueError):
    pass


class ColumnMismatch(EOCorruptError, ValueError):
    pass


class TooFewSamples(EOCorruptError, ValueError):
    pass


class DimensionMismatch(EOCorruptError, ValueError):
    pass


class NonConvergentEigen(EOCorruptError, ArithmeticError):
    pass


class NonConvexPolygon(EOCorruptError, ValueError):
    pass


class MissingCleanCell(EOCorruptError, ValueError):
    pass


class PredictionFormatError(EOCorruptError, ValueError):
    pass
