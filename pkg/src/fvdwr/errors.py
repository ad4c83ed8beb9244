"""Exception types raised by the solver, estimator and CLI."""


class FVDWRError(Exception):
    """Base class for all package errors."""


class MeshFormatError(FVDWRError):
    pass


class MeshTopologyError(FVDWRError):
    pass


class MeshOrientationError(FVDWRError):
    pass


class NotSelfCentered(FVDWRError):
    """A Voronoi diagram was requested on a mesh with an obtuse element."""

    def __init__(self, element, message=None):
        self.element = int(element)
        super().__init__(message or f"element {self.element} is not self-centered")


class MissingFragments(FVDWRError):
    pass


class FieldMismatch(FVDWRError):
    pass


class QuadratureError(FVDWRError):
    pass


class NumericalFailure(FVDWRError):
    """Base for failures of the nonlinear or linear solvers."""


class MaxIterations(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"Jacobian factorization failed at iteration {iteration}")


class LineSearchStall(NumericalFailure):
    pass


class ZeroTrueError(FVDWRError):
    """Effectivity is undefined because the reference error vanishes."""


class VoronoiInvalidated(FVDWRError):
    pass


class ConfigError(FVDWRError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
