"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`WeakGraphError`.  Two branches matter to the command line:
:class:`DataError` (malformed or unusable input, exit code 3) and
:class:`PreconditionError` (the data are fine but the requested method
cannot be applied to them, exit code 4).
"""


class WeakGraphError(Exception):
    """Base class for all package errors."""


class DataError(WeakGraphError):
    """Input data are malformed."""


class PreconditionError(WeakGraphError):
    """A method precondition does not hold for the given data."""

    #: alternative methods worth suggesting to the caller
    suggestion = ""


class ParseError(DataError):
    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        where = ""
        if row is not None:
            where = f" (line {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + where)


class RaggedRows(DataError):
    def __init__(self, line, expected, found):
        self.line = line
        self.expected = expected
        self.found = found
        super().__init__(
            f"line {line} has {found} fields, expected {expected}"
        )


class ZeroVariance(DataError):
    """A feature has zero sample variance."""


class NonPositiveDiagonal(PreconditionError):
    """A precision matrix has a non-positive diagonal entry."""


class SingularCovariance(PreconditionError):
    """The covariance matrix is singular or numerically so."""

    suggestion = (
        "use a high-dimensional method instead: the correlation graph "
        "(--method corr) or the cluster graph (--method cluster)"
    )


class NotPositiveDefinite(PreconditionError):
    """A model specification does not yield a positive definite covariance."""


class DegenerateVariance(PreconditionError):
    """An asymptotic standard error is (numerically) zero."""


class NegativeQuadraticForm(WeakGraphError):
    """A quadratic form with a fourth-moment matrix came out clearly negative."""


class TooManyDegenerateResamples(PreconditionError):
    suggestion = (
        "the dimension is too close to the sample size for this statistic; "
        "try the correlation graph (--method corr) or the cluster graph "
        "(--method cluster)"
    )


class AllDrawsNonPD(PreconditionError):
    suggestion = "use the replicate-reuse variant of the super-accurate bootstrap"


class ClusterTooLarge(PreconditionError):
    suggestion = "choose fewer clusters (L < floor(n/2))"


class SingularSubmatrix(PreconditionError):
    def __init__(self, pair, subset):
        self.pair = tuple(pair)
        self.subset = tuple(subset)
        super().__init__(
            f"covariance submatrix for pair {self.pair} given {self.subset} "
            "is singular"
        )


class BudgetExceeded(PreconditionError):
    suggestion = "lower L, or raise the budget cap"


class BandUndefined(PreconditionError):
    suggestion = (
        "D/n is too large for the finite-sample band; use the delta method "
        "or the bootstrap"
    )


class NodeMismatch(WeakGraphError):
    """Two graphs do not share the same node set."""
