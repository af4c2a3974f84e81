"""Shared exception types for the geometry workbench."""


class GeometryError(Exception):
    """Base class for all workbench errors."""


class OutOfDomain(GeometryError):
    """Point (or a finite-difference stencil point) is outside the chart domain."""


class SignatureError(GeometryError):
    """Metric eigenvalue sign count is not Lorentzian; model is misconfigured."""


class DegenerateMetric(GeometryError):
    """Metric inverse is numerically unreliable (condition number too large)."""


class ZeroSpatialPart(GeometryError):
    """Tangent vector has vanishing spatial part; no null rescaling exists."""


class NotNull(GeometryError):
    """Vector fails the null precondition |g(v,v)| <= tolerance."""


class EmptySample(GeometryError):
    """A sampling specification produced no usable in-domain samples."""


class UnsupportedDimension(GeometryError):
    """Dimension below 3 is rejected (the projective ODE divides by n - 2)."""


class ImmediateExit(GeometryError):
    """Geodesic start point sits on (or off) the domain boundary."""


class OutOfInterval(GeometryError):
    """Argument outside the open interval (-1, 1)."""


class SingularTransform(GeometryError):
    """Moebius coefficients with ad - bc = 0."""


class CriticalPoint(GeometryError):
    """Schwarzian requested where |f'| is below threshold."""


class PointOffArc(GeometryError):
    """Projective point does not lie on the development arc."""


class InvalidChain(GeometryError):
    """Chain violates joint continuity or link validity."""


class UnknownScenario(GeometryError):
    """Scenario name not in the registry."""


class ExpressionParseError(GeometryError):
    """Metric coefficient expression failed to parse.

    Carries the offending position and the token classes that would have
    been accepted there.
    """

    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at position {position}"
                         + (f" (expected {', '.join(expected)})" if expected else ""))
        self.position = position
        self.expected = tuple(expected)
