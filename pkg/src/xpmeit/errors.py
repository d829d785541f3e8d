"""Exception and warning classes shared across the package."""


class XpmError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(XpmError, ValueError):
    pass


class DomainError(XpmError, ValueError):
    """Input lies outside the region where a closed form is meaningful."""


class SolverError(XpmError, RuntimeError):
    """Steady-state linear system is singular or badly conditioned."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class StiffnessError(XpmError, RuntimeError):
    pass


class CalibrationError(XpmError, RuntimeError):
    pass


class AccuracyError(XpmError, ValueError):
    pass


class PreconditionError(XpmError, ValueError):
    pass


class ShapeError(XpmError, ValueError):
    """A scan curve does not contain the feature being measured."""


class SamplingError(XpmError, ValueError):
    pass


class ResolutionError(XpmError, ValueError):
    pass


class FlatTraceError(XpmError, ValueError):
    pass


class NotConvergedError(XpmError, RuntimeError):
    pass


class BaselineWarning(UserWarning):
    """Too few pre-pulse bins to estimate the trace baseline."""


class GridWarning(UserWarning):
    """Time grid is too coarse for the requested accuracy."""
