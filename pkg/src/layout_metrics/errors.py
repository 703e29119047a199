"""Exception hierarchy for the toolkit.

Loading problems (``ParseError``, ``ValidationError``) indicate bad input
files; everything else signals that an operation is undefined for otherwise
well-formed inputs (the CLI maps the former to exit code 1, the latter to 2).
"""


class LayoutMetricsError(Exception):
    """Base class for all toolkit errors."""


class ParseError(LayoutMetricsError):
    """A data file line could not be decoded or is structurally malformed."""


class ValidationError(LayoutMetricsError):
    """A decoded layout violates an invariant (range, vocabulary, identity)."""


class EmptyLayoutError(LayoutMetricsError):
    """A measure was applied to a layout with no elements."""


class MultisetMismatchError(LayoutMetricsError):
    """The layouts' label multisets differ, so the measure is undefined."""


class InfeasibleError(LayoutMetricsError):
    """The forbidden mask admits no matching of the required cardinality."""


class DimensionMismatchError(LayoutMetricsError):
    """Matrix shapes disagree."""


class InvalidSigmaError(LayoutMetricsError):
    """Scaling parameter must be a positive finite number."""


class DegenerateSamplingError(LayoutMetricsError):
    """A category's elements captured zero grid points; the grid is too coarse."""


class NoComparablePairsError(LayoutMetricsError):
    """No label multiset is shared between the two collections."""


class TooFewLayoutsError(LayoutMetricsError):
    """The operation needs more layouts than the collection provides."""


class DegenerateSigmaError(LayoutMetricsError):
    """The median pairwise distance is zero; the kernel bandwidth is undefined."""


class VocabularyTooSmallError(LayoutMetricsError):
    """Label noise needs at least two categories to choose a replacement."""


class UnknownMeasureError(LayoutMetricsError):
    """The measure identifier is not registered."""


class LengthMismatchError(LayoutMetricsError):
    """Score vectors have different lengths."""


class AllTiedError(LayoutMetricsError):
    """Rank correlation is undefined when one score vector is constant."""


class MultisetPrecheckFailedError(LayoutMetricsError):
    """Some layout pairs are not multiset-equal, so the requested measure set
    cannot be evaluated on them."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)
