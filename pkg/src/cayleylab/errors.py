"""Exception types shared across the library."""


class CayleyLabError(Exception):
    """Base class for all library-specific errors."""


class InputError(CayleyLabError, ValueError):
    """Malformed element or invalid argument for the given group model."""


class CapacityError(CayleyLabError):
    """A ball build exceeded the configured element cap.

    Carries the radius that was fully explored before the cap was hit.
    """

    def __init__(self, message: str, radius_reached: int):
        super().__init__(message)
        self.radius_reached = radius_reached


class SamplingError(CayleyLabError):
    """A sampler exhausted its step horizon before its stop rule fired."""


class ParameterError(CayleyLabError, ValueError):
    """Bound parameters outside the domain where a formula is valid."""


class NumericError(CayleyLabError):
    """Quadrature or series evaluation failed to converge."""


class FitError(CayleyLabError, ValueError):
    """Exponent fit is impossible on the given records."""


class ExperimentError(CayleyLabError):
    """An experiment radius exceeded the tolerated sampling-failure rate."""
