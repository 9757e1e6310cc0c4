"""Exception hierarchy shared by all flqr modules.

Every numerical failure raised by the library derives from :class:`FlqrError`
so that callers (and the CLI) can distinguish usage errors from numerical
failures with a single except clause.
"""


class FlqrError(Exception):
    """Base class for all flqr errors."""


class InvalidInput(FlqrError):
    """Input data violates a precondition (non-finite values, bad sizes)."""


class GridInvalid(FlqrError):
    """Grid abscissae are not a strictly increasing cover of [0, 1]."""


class GridMismatch(FlqrError):
    """Two grid-based objects do not share the same grid."""


class DimensionMismatch(FlqrError):
    """Array dimensions are inconsistent with each other."""


class ParseError(FlqrError):
    """A data file could not be parsed.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending record, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DomainError(FlqrError):
    """A scalar argument lies outside its mathematical domain."""


class SafeguardTrigger(FlqrError):
    """The BB step denominators are degenerate; the caller must fall back."""


class DivergenceError(FlqrError):
    """The optimizer produced a non-finite objective value.

    Carries the partial trace so callers can inspect the blow-up.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DegenerateBandwidth(FlqrError):
    """The pilot residual scale is zero; no rule-of-thumb bandwidth exists."""


class TuningFailure(FlqrError):
    """Every candidate penalty value failed cross-validation."""


class SpectrumFailure(FlqrError):
    """The generalized eigenproblem is numerically singular beyond repair."""


class ConfigMismatch(FlqrError):
    """A fit and an eigensystem were built with incompatible inputs."""


class InsufficientPaths(FlqrError):
    """Too few Monte Carlo paths were requested for a band quantile."""


class InvalidTauGrid(FlqrError):
    """A quantile-level grid is empty, out of range, or contains duplicates."""
