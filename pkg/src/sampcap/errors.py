"""Exception hierarchy shared by every module of the package."""

__all__ = [
    "SampcapError",
    "DomainError",
    "GridMismatchError",
    "OutOfRangeError",
    "InfeasibleError",
    "RateExceedsGridError",
    "GridAlignmentError",
    "RightInvertibilityError",
    "HypothesisError",
    "PreconditionError",
    "NumericalError",
    "ConfigError",
]


class SampcapError(Exception):
    """Base class for all errors raised by the library."""


class DomainError(SampcapError, ValueError):
    """A value lies outside its mathematical domain (negative gain, ...)."""


class GridMismatchError(SampcapError, ValueError):
    """Two spectra that must share a frequency grid do not."""


class OutOfRangeError(SampcapError, ValueError):
    """A spectral set reaches outside the grid's frequency range."""


class InfeasibleError(SampcapError, ValueError):
    """Positive power cannot be allocated because every gain is zero."""


class RateExceedsGridError(SampcapError, ValueError):
    """Requested sampling rate exceeds the grid's total bandwidth."""


class GridAlignmentError(SampcapError, ValueError):
    """A rate or period is not commensurate with the frequency grid.

    Attributes
    ----------
    suggestion : float or None
        Nearest rate that would be commensurate, when one is known.
    """

    def __init__(self, message, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class RightInvertibilityError(SampcapError):
    """The sampler's noise covariance is numerically singular.

    Attributes
    ----------
    frequency : float or None
        Base frequency (Hz) where the smallest singular value was found,
        or None for time-domain Gram matrices.
    sigma_min, sigma_max : float
        Extreme singular values that triggered the failure.
    """

    def __init__(self, message, frequency=None, sigma_min=None,
                 sigma_max=None):
        super().__init__(message)
        self.frequency = frequency
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class HypothesisError(SampcapError, ValueError):
    """An input violates a hypothesis required by a capacity formula."""


class PreconditionError(SampcapError, ValueError):
    """An operation was called with parameters outside its validity range."""


class NumericalError(SampcapError, ArithmeticError):
    """A numerical result violates a structural property beyond tolerance."""


class ConfigError(SampcapError, ValueError):
    """A configuration file or override is malformed."""
