"""Exception and warning types.

``DataError`` covers bad inputs (CLI exit code 3), ``NumericalError`` covers
degenerate or failed computations (exit code 4).
"""


class SurvAnchorError(Exception):
    pass


class ConfigError(SurvAnchorError, ValueError):
    pass


class DataError(SurvAnchorError, ValueError):
    pass


class NumericalError(SurvAnchorError, ArithmeticError):
    pass


# --- ingestion / dataset ---------------------------------------------------

class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"missing column {column!r}")
        self.column = column


class UnparseableCell(DataError):
    def __init__(self, row, col, value):
        super().__init__(f"cannot parse {value!r} at row {row}, column {col!r}")
        self.row, self.col, self.value = row, col, value


class MissingValue(UnparseableCell):
    pass


class NegativeTime(DataError):
    def __init__(self, row, value=None):
        super().__init__(f"negative observed time {value!r} at row {row}")
        self.row = row


class BadEventFlag(DataError):
    def __init__(self, row, value=None):
        super().__init__(f"event flag must be 0 or 1, got {value!r} at row {row}")
        self.row = row


class BadFractions(DataError):
    pass


class DegenerateFeature(DataError):
    pass


class BadSpec(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class MalformedBundle(DataError):
    pass


class InconsistentRowCount(MalformedBundle):
    pass


class LengthMismatch(DataError):
    pass


class EmptyGroup(DataError):
    pass


class EmptyBundle(DataError):
    pass


class EmptyCluster(DataError):
    pass


class EmptyConcept(DataError):
    pass


class EmptyTopSet(DataError):
    pass


class NotUnitNorm(DataError):
    pass


class GridMismatch(DataError):
    pass


class TooFewGroups(DataError):
    pass


class BadQ(DataError):
    pass


# --- numerical ---------------------------------------------------------------

class NoEvents(NumericalError):
    pass


class NoEventsInBatch(NoEvents):
    pass


class NoComparablePairs(NumericalError):
    pass


class DivergedLoss(NumericalError):
    pass


class EmptyClusterCollapse(NumericalError):
    pass


class ZeroAnchor(NumericalError):
    pass


class DegenerateEmbedding(NumericalError):
    def __init__(self, row):
        super().__init__(f"centered embedding at row {row} is numerically zero")
        self.row = row


class DegenerateProjections(NumericalError):
    pass


class DegenerateTable(NumericalError):
    pass


class AllTied(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


# --- warnings ----------------------------------------------------------------

class ConceptOverlapsVisualization(UserWarning):
    pass


class LowExpectedCount(UserWarning):
    pass


class NormalizationGuard(RuntimeWarning):
    pass


class ClumpingWarning(UserWarning):
    pass
