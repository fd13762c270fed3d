"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures to distinct process statuses without a lookup table per module.
"""

from __future__ import annotations


class GlottoError(ValueError):
    exit_code = 1


# wordlist -------------------------------------------------------------------

class ParseError(GlottoError):
    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidFormError(GlottoError):
    exit_code = 3


class EmptySelectionError(GlottoError):
    exit_code = 4


# metric ---------------------------------------------------------------------

class MetricError(GlottoError):
    exit_code = 5


class UndefinedDistanceError(MetricError):
    pass


class MissingSlotError(MetricError):
    pass


class ScorerError(MetricError):
    pass


class NoComparableItemsError(MetricError):
    pass


# stability ------------------------------------------------------------------

class ConfigurationError(GlottoError):
    exit_code = 6


class ParameterError(GlottoError):
    exit_code = 7


class DegenerateFitError(GlottoError):
    exit_code = 8


class UndefinedCorrelationError(DegenerateFitError):
    pass


# chrono ---------------------------------------------------------------------

class ChronoError(GlottoError):
    exit_code = 9


class DivergenceError(ChronoError):
    pass


class DomainError(ChronoError):
    pass


class ProfileIncompleteError(ChronoError):
    pass


class InternalConsistencyError(ChronoError):
    pass


class CalibrationError(ChronoError):
    pass


# ranking --------------------------------------------------------------------

class RankingError(GlottoError):
    exit_code = 10


class EmptyRankingError(RankingError):
    pass


class DomainMismatchError(RankingError):
    pass


class ComparisonError(RankingError):
    pass
