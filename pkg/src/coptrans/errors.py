"""Exception types shared across the package."""


class CoptransError(Exception):
    """Base class for all coptrans errors."""


class InvalidData(CoptransError):
    """Input data violates a structural precondition (shape, finiteness, length)."""


class DegenerateColumn(InvalidData):
    """A variable has fewer than two distinct values; ranks are undefined."""


class InvalidParameter(CoptransError):
    """A numeric or enumerated parameter is outside its documented range."""


class InfeasibleProjection(CoptransError):
    """Margin projection cannot succeed because a row or column carries no mass."""


class ConvergenceFailure(CoptransError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    Carries the last marginal residual, the last objective value where one is
    available, and (when raised from a pairwise computation) the pair indices.
    """

    def __init__(self, message, residual=None, value=None, pair=None):
        super().__init__(message)
        self.residual = residual
        self.value = value
        self.pair = pair


class UnderflowDetected(CoptransError):
    """Plain-domain Sinkhorn scaling underflowed; retry with log_domain=True."""


class OracleTooLarge(CoptransError):
    """Exact transport instance exceeds the desk-scale support limit."""


class AmbiguousSpec(CoptransError):
    """A copula sits at distance zero from both the target and the forget set."""


class ParseError(CoptransError):
    """A file could not be parsed; carries the offending path and line."""

    def __init__(self, message, path=None, line=None):
        super().__init__(message)
        self.path = path
        self.line = line


class IoError(CoptransError):
    """Filesystem read/write failure."""
