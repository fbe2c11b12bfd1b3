"""Exception types shared across the package."""


class WdsirError(Exception):
    """Base class for all package errors."""


class ParameterError(WdsirError, ValueError):
    """A physical parameter is outside its admissible range."""


class StructuralInfeasibility(WdsirError):
    """The active subgraph cannot carry the requested demands.

    Raised when a node with nonzero demand is cut off from every source
    (typically by an off pump), or when a connected component holds more
    than one source so that tree flows are no longer determined by demands.
    """


class PreconditionError(WdsirError):
    """An operation was called on inputs violating its precondition."""


class OpsInfeasibleError(WdsirError):
    """No pump status combination is feasible at the forecast demands."""

    def __init__(self, message, least_violated=None, residual=None):
        super().__init__(message)
        self.least_violated = least_violated
        self.residual = residual


class SupportError(WdsirError):
    """A support-function solve failed or did not converge."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DegenerateHullError(WdsirError):
    """Points do not span a full-dimensional polytope."""


class UnsupportedDimensionError(WdsirError):
    """Requested geometry is not implemented for this dimension."""


class InsufficientSamplesError(WdsirError):
    """Rejection sampling could not find enough feasible points."""


class NetworkFileError(WdsirError):
    """A network file could not be parsed; carries a 1-based location."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class ExportError(WdsirError):
    """An artifact cannot be rendered in the requested format."""
