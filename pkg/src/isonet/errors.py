"""Exception hierarchy shared by every isonet module."""


class IsonetError(Exception):
    """Base class for all library errors."""


class DomainError(IsonetError, ValueError):
    """Input lies outside the domain of an operation."""


class SingularMatrixError(DomainError):
    """A quaternionic matrix with vanishing Study determinant was inverted."""


class DegenerateQuadError(DomainError):
    """A quadrilateral has coincident consecutive vertices."""


class ValidationError(DomainError):
    """A point failed an on-manifold check."""


class NotIsothermicError(IsonetError):
    """Cross ratios do not factor, or a propagation failed to close."""

    def __init__(self, message, worst=None, residual=None):
        super().__init__(message)
        self.worst = worst
        self.residual = residual


class PoleError(IsonetError):
    """lambda * a_pq == 1 on some edge, where the transforms blow up."""

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class SphericalStarError(IsonetError):
    """A vertex star is spherical, so the linear solve is singular."""


class StepFailure(IsonetError):
    """A nonlinear step of a generator did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class SchemaError(IsonetError):
    """A net file has the wrong layout or version."""
