"""Exception types shared across the laboratory."""


class ConfigurationError(ValueError):
    """A grid, cutoff or run configuration violates its preconditions."""


class DomainError(ValueError):
    """An operator was applied to data outside its admissible class."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class StepError(RuntimeError):
    """A time step violated its stability bound.

    Carries ``suggested_dt``, the largest step currently admissible.
    """

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class OracleDivergenceError(RuntimeError):
    """Fixed-point iteration of the integral-equation oracle diverged."""
