"""Exception hierarchy. Every validation failure raises one of these."""


class FSCILError(ValueError):
    """Base class for all package errors."""


# task matrix ingestion
class MalformedHeader(FSCILError):
    pass


class RowLengthMismatch(FSCILError):
    pass


class MalformedRow(FSCILError):
    pass


class ValueOutOfRange(FSCILError):
    pass


class NonPositiveLayout(FSCILError):
    pass


class VariableNovelSize(FSCILError):
    """Novel tasks with differing class counts are not supported."""


# metrics
class SessionOutOfRange(FSCILError):
    pass


class NoNovelTasks(FSCILError):
    pass


class AlphaOutOfRange(FSCILError):
    pass


class GridTooSmall(FSCILError):
    pass


class LayoutMismatch(FSCILError):
    pass


class UnknownMetric(FSCILError):
    pass


# rectifier numerics
class ZeroVector(FSCILError):
    pass


class DimMismatch(FSCILError):
    pass


class UnknownClass(FSCILError):
    pass


class EmptyBatch(FSCILError):
    pass


class TooFewSamples(FSCILError):
    pass


class KTooLarge(FSCILError):
    pass


class NotPSD(FSCILError):
    pass


class EmptyEnsemble(FSCILError):
    pass


# simulator
class BadConfig(FSCILError):
    pass


class NonFiniteLoss(FSCILError):
    pass
