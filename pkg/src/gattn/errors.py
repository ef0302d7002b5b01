"""Exception and warning types shared across the package."""


class GattnError(Exception):
    """Base class for all package errors."""


class DimensionError(GattnError, ValueError):
    pass


class ParameterError(GattnError, ValueError):
    pass


class DegenerateColumnError(GattnError, ValueError):
    """A softmax column has no admissible entry (isolated node, no self-loop)."""


class DegenerateNeighborhoodError(GattnError, ValueError):
    pass


class DegenerateProjectionError(GattnError, ValueError):
    pass


class DegreeZeroError(GattnError, ValueError):
    pass


class GraphFormatError(GattnError, ValueError):
    pass


class UnknownOperatorError(GattnError, ValueError):
    pass


class NondifferentiablePointWarning(RuntimeWarning):
    """Emitted when a backward pass is evaluated at an |.| kink or a top-k tie."""
