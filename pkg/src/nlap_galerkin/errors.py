"""Exception types shared across the package."""


class NlapError(Exception):
    """Base class for all package errors."""


class ParameterError(NlapError, ValueError):
    """A parameter falls outside its admissible window."""


class RangeError(NlapError, OverflowError):
    """An exponential argument exceeds the representable double range."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class QuadratureError(NlapError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


class CertificateError(NlapError):
    """The boundary condition <F(x), x> >= threshold failed on the sphere."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SearchBudgetError(NlapError):
    """Zero search ran out of budget; a zero still exists in the ball."""

    def __init__(self, message, best_point=None, best_residual=float("inf")):
        super().__init__(message)
        self.best_point = best_point
        self.best_residual = best_residual


class ScheduleError(NlapError):
    """A (k, n) continuation schedule did not converge."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class StagnationError(NlapError):
    """An iterative minimisation stalled before reaching its tolerance."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value
