"""
Velocity fields, surface traces and vortex particle clouds.
"""

from typing import Any, Optional, Protocol

import numpy as np
from pydantic import field_validator, model_validator
from scipy.spatial import cKDTree

from .base import ArrayModel, as_float_array
from .geometry import TubeMesh


class VortexParticleCloud(ArrayModel):
    """Regularized vortex particles with vector weights α = ω × volume."""

    positions: np.ndarray
    alphas: np.ndarray
    delta: float

    @field_validator("positions", "alphas", mode="before")
    @classmethod
    def validate_arrays(cls, v: Any) -> np.ndarray:
        """Particle arrays are (N, 3)."""
        return as_float_array(np.reshape(v, (-1, 3)), "particle array", (None, 3))

    @field_validator("delta")
    @classmethod
    def validate_delta(cls, v: float) -> float:
        """Core radius is positive."""
        if v <= 0.0:
            raise ValueError("Core radius delta must be positive")
        return v

    @model_validator(mode="after")
    def validate_counts(self) -> "VortexParticleCloud":
        """One weight per position."""
        if self.positions.shape != self.alphas.shape:
            raise ValueError("positions and alphas must have the same shape")
        return self

    @classmethod
    def empty(cls, delta: float = 0.1) -> "VortexParticleCloud":
        return cls(positions=np.zeros((0, 3)), alphas=np.zeros((0, 3)), delta=delta)

    @property
    def n_particles(self) -> int:
        return int(self.positions.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.n_particles == 0

    def with_state(self, positions: np.ndarray, alphas: np.ndarray) -> "VortexParticleCloud":
        """Same core radius, new positions and weights."""
        return VortexParticleCloud(positions=positions, alphas=alphas, delta=self.delta)

    def total_vorticity(self) -> np.ndarray:
        return np.asarray(np.sum(self.alphas, axis=0))

    def support_diameter(self) -> float:
        """Largest distance between two particles."""
        if self.n_particles < 2:
            return 0.0
        center = np.mean(self.positions, axis=0)
        # two-sweep estimate, exact for the ball-like supports used here
        far = self.positions[np.argmax(np.linalg.norm(self.positions - center, axis=1))]
        return float(np.max(np.linalg.norm(self.positions - far, axis=1)))

    def min_distance_to(self, points: np.ndarray) -> float:
        """Smallest distance between any particle and a set of points."""
        if self.is_empty or len(points) == 0:
            return float("inf")
        distances, _ = cKDTree(np.atleast_2d(points)).query(self.positions)
        return float(np.min(distances))


class FieldSample(ArrayModel):
    """
    Velocity values (M, 3) and optional gradients (M, 3, 3) with gradient[k, a, b] = ∂u_a/∂x_b.
    """

    value: np.ndarray
    gradient: Optional[np.ndarray] = None

    @field_validator("value", mode="before")
    @classmethod
    def validate_value(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "value", (None, 3))

    @field_validator("gradient", mode="before")
    @classmethod
    def validate_gradient(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        return as_float_array(v, "gradient", (None, 3, 3))

    @classmethod
    def zeros(cls, n: int, want_gradient: bool = False) -> "FieldSample":
        return cls(
            value=np.zeros((n, 3)), gradient=np.zeros((n, 3, 3)) if want_gradient else None
        )

    def divergence(self) -> np.ndarray:
        if self.gradient is None:
            raise ValueError("FieldSample has no gradient")
        return np.asarray(np.trace(self.gradient, axis1=1, axis2=2))

    def curl(self) -> np.ndarray:
        if self.gradient is None:
            raise ValueError("FieldSample has no gradient")
        g = self.gradient
        return np.stack(
            [g[:, 2, 1] - g[:, 1, 2], g[:, 0, 2] - g[:, 2, 0], g[:, 1, 0] - g[:, 0, 1]], axis=1
        )

    def __add__(self, other: "FieldSample") -> "FieldSample":
        gradient = None
        if self.gradient is not None and other.gradient is not None:
            gradient = self.gradient + other.gradient
        return FieldSample(value=self.value + other.value, gradient=gradient)

    def scaled(self, factor: float) -> "FieldSample":
        gradient = None if self.gradient is None else factor * self.gradient
        return FieldSample(value=factor * self.value, gradient=gradient)


class SurfaceDensity(ArrayModel):
    """Single-layer charge density, one value per panel."""

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "density", (None,))


class SurfaceField(ArrayModel):
    """Trace of a velocity field at the panel centroids."""

    vectors: np.ndarray

    @field_validator("vectors", mode="before")
    @classmethod
    def validate_vectors(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "surface field", (None, 3))

    @classmethod
    def zeros(cls, mesh: TubeMesh) -> "SurfaceField":
        return cls(vectors=np.zeros((mesh.n_panels, 3)))

    def normal_component(self, mesh: TubeMesh) -> np.ndarray:
        return np.asarray(np.sum(self.vectors * mesh.normals, axis=1))

    def tangential_part(self, mesh: TubeMesh) -> np.ndarray:
        return self.vectors - self.normal_component(mesh)[:, None] * mesh.normals

    def l2_norm(self, mesh: TubeMesh) -> float:
        """Area-weighted L² norm over the tube surface."""
        return float(np.sqrt(np.sum(np.sum(self.vectors**2, axis=1) * mesh.areas)))

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.sum(self.vectors**2, axis=1))))

    def __add__(self, other: "SurfaceField") -> "SurfaceField":
        return SurfaceField(vectors=self.vectors + other.vectors)

    def scaled(self, factor: float) -> "SurfaceField":
        return SurfaceField(vectors=factor * self.vectors)


class FieldEvaluator(Protocol):
    """Anything that evaluates a velocity field at a batch of points."""

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample: ...
