"""Exception hierarchy shared by all modules."""


class PatchError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(PatchError, ValueError):
    """Invalid parameters or configuration values."""


class SingularEvaluationError(PatchError, ValueError):
    """A kernel was evaluated at its singularity."""


class GeometryError(PatchError, ValueError):
    """Degenerate or invalid curve geometry."""


class TopologyError(PatchError):
    """The marker polyline self-intersects (unresolvable state near collapse)."""


class NumericalError(PatchError, ArithmeticError):
    """Non-finite values produced during a computation."""


class NearBoundaryError(PatchError, ValueError):
    """Query point too close to the boundary for plain trapezoid accuracy."""


class CoverageError(PatchError, ValueError):
    """A flow history does not cover the requested time interval."""


class EscapeError(PatchError):
    """A traced trajectory left the admissible bounding box."""


class DomainError(PatchError, ValueError):
    """A stencil or query leaves the domain of a grid."""


class DegenerateDefiningFunctionError(PatchError, ValueError):
    """The gradient of a defining function (nearly) vanishes on the boundary."""
