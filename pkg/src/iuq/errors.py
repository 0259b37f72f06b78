"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its legal range."""


class InvalidInputError(ValueError):
    """Input data (datasets, replication vectors, distributions) is malformed."""


class SubsampleTooSmallError(InvalidParameterError):
    """A subsample ratio produces a subsample of size zero."""


class BudgetTooSmallError(InvalidParameterError):
    """A simulation budget cannot accommodate a legal (B, R) pair."""
