"""
Exceptions raised by the rigid filament simulator.

Input and precondition failures derive from ``ValueError`` so callers that only know about
configuration errors keep working; failures during a run derive from ``RuntimeError``.
"""

from typing import Any, Optional


class RigidFilamentError(Exception):
    """Base class for every error raised by this package."""


class DegenerateCurve(RigidFilamentError, ValueError):
    """Curve input has too few points or repeated consecutive points."""


class SelfIntersecting(RigidFilamentError, ValueError):
    """Curve comes back onto itself."""


class NotClosed(RigidFilamentError, ValueError):
    """An operation that needs a closed curve got an open one."""


class TubeSelfOverlap(RigidFilamentError, ValueError):
    """Tube radius is too large for the curvature of its centreline."""


class OutsideTubeNeighborhood(RigidFilamentError, ValueError):
    """Point is too far from the curve for tube coordinates to be defined."""


class SingularEvaluation(RigidFilamentError, ValueError):
    """Singular kernel evaluated on its own source."""


class InvalidRadius(RigidFilamentError, ValueError):
    """Non-positive ring radius."""


class NotOnSurface(RigidFilamentError, ValueError):
    """Point is not a collocation point of the mesh."""


class CompatibilityViolation(RigidFilamentError, ValueError):
    """Neumann data does not have zero net flux."""


class InvalidTimestep(RigidFilamentError, ValueError):
    """Time step is not strictly positive."""


class SolverFailure(RigidFilamentError, RuntimeError):
    """Linear system is singular or the solve residual is too large."""


class IOFailure(RigidFilamentError, RuntimeError):
    """Output directory or file cannot be written."""


class SupportTooClose(RigidFilamentError, RuntimeError):
    """Vorticity support came closer to the body than the separation floor."""

    def __init__(self, message: str, separation: float, state: Optional[Any] = None) -> None:
        super().__init__(message)
        self.separation = separation
        self.state = state
