"""Exception and warning types raised by :mod:`hinfgp`."""


class HinfGPError(Exception):
    """Base class for all package errors."""


class NumericalError(HinfGPError):
    """A computation could not be carried out to the required accuracy."""


class FactorizationFailed(NumericalError):
    pass


class SchurSingular(FactorizationFailed):
    pass


class SingularData(NumericalError):
    pass


class DegenerateCovariance(NumericalError):
    pass


class DerivativeUnavailable(HinfGPError):
    pass


class InvalidPair(NumericalError):
    pass


class ZeroGain(NumericalError):
    pass


class FilterUnderflow(NumericalError):
    pass


class DimensionMismatch(HinfGPError, ValueError):
    pass


class BadHyperparameter(HinfGPError, ValueError):
    pass


class BadParameters(HinfGPError, ValueError):
    pass


class BadMultiplier(HinfGPError, ValueError):
    pass


class TailTooLarge(HinfGPError, ValueError):
    pass


class QuadratureNotConverged(UserWarning):
    """Doubling the quadrature resolution moved the result by more than 1%."""
