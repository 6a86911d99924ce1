"""Exception hierarchy shared by the numerical modules."""


class SHSawError(Exception):
    """Base class for all package errors."""


class ConditioningError(SHSawError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class RetryableAlphaError(SHSawError, ArithmeticError):
    """Riccati integration overflowed or failed to converge for this shift."""


class SingularShiftError(SHSawError, ArithmeticError):
    """A resolvent shift landed on (or next to) an eigenvalue."""


class ContourCollisionError(SHSawError, ArithmeticError):
    """Contour quadrature did not converge, an eigenvalue sits near the contour."""


class IndeterminateCountError(SHSawError, ArithmeticError):
    """The trace of the propagating projector is not close to an even integer."""


class NormalizationError(SHSawError, ArithmeticError):
    """The reference determinant used for normalization is singular."""


class OracleUnavailableError(SHSawError):
    """The brute-force reference refuses inputs outside its validity domain."""


class ConfigError(SHSawError, ValueError):
    """Malformed or inconsistent run configuration."""
