"""Exception hierarchy shared across the package.

``ValidationError`` covers malformed inputs and violated preconditions
(CLI exit code 2); ``NumericalConsistencyError`` covers internal checks
that two supposedly-equivalent computations disagree (CLI exit code 3).
"""


class ValidationError(ValueError):
    """Malformed input or violated precondition."""


class NumericalConsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""


class NonInjectiveError(ValidationError):
    """An operation requiring an injective tensor received a non-injective one."""


class DegenerateSpectrumError(ValidationError):
    """The leading transfer eigenvalue is degenerate where uniqueness is required."""
