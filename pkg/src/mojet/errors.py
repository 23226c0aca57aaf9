"""Exception taxonomy shared across the library.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataFileError -> 4, everything else derived from MojetError -> 3.
"""


class MojetError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MojetError, ValueError):
    """An input violates a documented precondition (non-finite, bad range...)."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent with the operation."""


class NumericError(MojetError, ArithmeticError):
    """A numeric computation failed or produced non-finite values."""


class SingularSystemError(NumericError):
    """A linear system is singular or not positive definite."""


class UndefinedSimilarityError(MojetError, ValueError):
    """Subspace similarity requested for a matrix with no nonzero direction."""


class DegenerateSpectrumError(MojetError, ValueError):
    """A spectrum-based rule was applied to an identically-zero spectrum."""


class NotLinearError(MojetError, ValueError):
    """Jets are inconsistent with a globally linear tap."""


class UnidentifiableError(MojetError, ValueError):
    """A factorization cannot be pinned down (rank hypothesis violated)."""


class ConfigError(MojetError, ValueError):
    """Invalid experiment configuration."""


class DataFileError(MojetError, ValueError):
    """A data file is missing or malformed."""
