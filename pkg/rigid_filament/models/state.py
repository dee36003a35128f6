"""
Rigid-body and simulation state models.
"""

from typing import Any, Literal, Optional

import numpy as np
from pydantic import field_validator, model_validator

from .base import ArrayModel, as_float_array, as_vector3, split_p
from .coefficients import CoefficientSet, KirchhoffSet
from .fields import SurfaceDensity, SurfaceField, VortexParticleCloud
from .geometry import Curve, TubeMesh

Regime = Literal["limit", "eps"]
FlowKind = Literal["irrotational", "vortical"]


class RigidState(ArrayModel):
    """Body-frame velocity p = (ℓ, Ω) at time t."""

    p: np.ndarray
    t: float = 0.0

    @field_validator("p", mode="before")
    @classmethod
    def validate_p(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "p", (6,))

    @property
    def ell(self) -> np.ndarray:
        return split_p(self.p)[0]

    @property
    def omega(self) -> np.ndarray:
        return split_p(self.p)[1]


class Pose(ArrayModel):
    """Lab-frame position h and orientation Q of the body."""

    h: np.ndarray
    Q: np.ndarray

    @field_validator("h", mode="before")
    @classmethod
    def validate_h(cls, v: Any) -> np.ndarray:
        return as_vector3(v, "h")

    @field_validator("Q", mode="before")
    @classmethod
    def validate_q(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "Q", (3, 3))

    @model_validator(mode="after")
    def validate_rotation(self) -> "Pose":
        """Q is a proper rotation."""
        if np.max(np.abs(self.Q.T @ self.Q - np.eye(3))) > 1e-8:
            raise ValueError("Q must be orthogonal")
        if np.linalg.det(self.Q) <= 0.0:
            raise ValueError("Q must have positive determinant")
        return self

    @classmethod
    def identity(cls) -> "Pose":
        return cls(h=np.zeros(3), Q=np.eye(3))


class PoseTrajectory(ArrayModel):
    """Sampled lab-frame poses."""

    times: np.ndarray
    h: np.ndarray
    Q: np.ndarray

    @field_validator("times", mode="before")
    @classmethod
    def validate_times(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "times", (None,))

    @field_validator("h", mode="before")
    @classmethod
    def validate_h(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "h", (None, 3))

    @field_validator("Q", mode="before")
    @classmethod
    def validate_q(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "Q", (None, 3, 3))

    def pose(self, k: int) -> Pose:
        return Pose(h=self.h[k], Q=self.Q[k])

    def inertia_lab(self, j0: np.ndarray, k: int) -> np.ndarray:
        """Lab-frame inertia J = Q J0 Qᵀ at output k."""
        q = self.Q[k]
        return np.asarray(q @ j0 @ q.T)


class FlowEnvironment(ArrayModel):
    """Time-independent body-frame data a simulation needs besides its coefficients."""

    curve: Curve
    mesh: Optional[TubeMesh] = None
    kirchhoff: Optional[KirchhoffSet] = None
    harmonic_density: Optional[SurfaceDensity] = None
    harmonic_trace: Optional[SurfaceField] = None
    curve_oversampling: int = 8
    # factored Neumann operator for reflection solves
    solver: Optional[Any] = None


class SimState(ArrayModel):
    """Full state of one simulation at one time."""

    rigid: RigidState
    pose: Pose
    cloud: VortexParticleCloud
    coeffs: CoefficientSet
    environment: FlowEnvironment
    regime: Regime = "limit"
    flow: FlowKind = "irrotational"
    mu: float = 1.0
    separation_floor: float = 0.0
    reflection_stride: int = 1
    step_index: int = 0
    reflection_density: Optional[SurfaceDensity] = None
    # index of the only active velocity component, None for the full system
    reduced_axis: Optional[int] = None

    @model_validator(mode="after")
    def validate_mode(self) -> "SimState":
        """Eps regime needs a mesh; vortical flow needs a cloud."""
        if self.regime == "eps" and self.environment.mesh is None:
            raise ValueError("Eps regime needs a tube mesh")
        if self.reduced_axis is not None and not 0 <= self.reduced_axis < 6:
            raise ValueError("reduced_axis must be in 0..5")
        return self

    @property
    def t(self) -> float:
        return self.rigid.t

    def evolve(self, **update: Any) -> "SimState":
        """Copy with some fields replaced."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(update)
        return SimState(**fields)
