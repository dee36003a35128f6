"""
Curve, frame and tube surface models.
"""

import hashlib
from functools import cached_property
from typing import Any, Dict, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .base import ArrayModel, as_float_array, as_vector3


class Curve(ArrayModel):
    """Closed curve sampled uniformly in arc length."""

    samples: np.ndarray
    arc_params: np.ndarray
    length: float
    closed: bool = True
    # position of the original centroid when the curve was recentred
    center_shift: np.ndarray = Field(default_factory=lambda: np.zeros(3))

    @field_validator("samples", mode="before")
    @classmethod
    def validate_samples(cls, v: Any) -> np.ndarray:
        """Samples are an (N, 3) finite array with at least 4 rows."""
        array = as_float_array(v, "samples", (None, 3))
        if array.shape[0] < 4:
            raise ValueError("A curve needs at least 4 samples")
        return array

    @field_validator("arc_params", mode="before")
    @classmethod
    def validate_arc_params(cls, v: Any) -> np.ndarray:
        """Arc parameters are a finite 1D array."""
        return as_float_array(v, "arc_params", (None,))

    @field_validator("center_shift", mode="before")
    @classmethod
    def validate_center_shift(cls, v: Any) -> np.ndarray:
        """Centre shift is a 3-vector."""
        return as_vector3(v, "center_shift")

    @model_validator(mode="after")
    def validate_uniform_grid(self) -> "Curve":
        """Arc parameters start at 0 and are uniformly spaced over [0, L)."""
        if self.length <= 0.0:
            raise ValueError("Curve length must be positive")
        n = self.samples.shape[0]
        if self.arc_params.shape != (n,):
            raise ValueError("arc_params must have one entry per sample")
        gaps = np.diff(np.append(self.arc_params, self.length))
        if np.max(np.abs(gaps - self.length / n)) > 1e-12 * self.length:
            raise ValueError("Curve samples are not uniform in arc length")
        return self

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def spacing(self) -> float:
        return self.length / self.n_samples

    @cached_property
    def spline(self) -> CubicSpline:
        knots = np.append(self.arc_params, self.length)
        values = np.vstack([self.samples, self.samples[:1]])
        return CubicSpline(knots, values, axis=0, bc_type="periodic")

    def evaluate(self, t: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Evaluate the periodic interpolant at arbitrary arc parameters.

        Args:
            t: Scalar or array of arc parameters (wrapped into [0, L))

        Returns:
            Positions, unit tangents and curvature vectors dτ/ds, each of shape t.shape + (3,)
        """
        s = np.mod(np.asarray(t, dtype=np.float64), self.length)
        position = self.spline(s)
        d1 = self.spline(s, 1)
        d2 = self.spline(s, 2)
        speed = np.linalg.norm(d1, axis=-1, keepdims=True)
        tangent = d1 / speed
        along = np.sum(d2 * tangent, axis=-1, keepdims=True)
        curvature = (d2 - along * tangent) / speed**2
        return position, tangent, curvature

    @cached_property
    def tangents(self) -> np.ndarray:
        return self.evaluate(self.arc_params)[1]

    @cached_property
    def curvature_vectors(self) -> np.ndarray:
        return self.evaluate(self.arc_params)[2]

    @cached_property
    def min_curvature_radius(self) -> float:
        """Smallest osculating-circle radius over the samples."""
        kappa = float(np.max(np.linalg.norm(self.curvature_vectors, axis=1)))
        return float("inf") if kappa == 0.0 else 1.0 / kappa

    @cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self.samples)

    def distance_to(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest curve sample."""
        distances, _ = self.kdtree.query(np.atleast_2d(points))
        return np.asarray(distances)

    def centroid(self) -> np.ndarray:
        """Arc-length weighted centroid; on the uniform arc-length grid this is the sample mean."""
        return np.asarray(np.mean(self.samples, axis=0))

    def translated(self, shift: Any) -> "Curve":
        """Return the curve moved by a constant vector."""
        return Curve(
            samples=self.samples + np.asarray(shift, dtype=np.float64),
            arc_params=self.arc_params,
            length=self.length,
            closed=self.closed,
            center_shift=self.center_shift,
        )

    def recentered(self) -> "Curve":
        """Return the curve moved so its centroid sits at the origin."""
        centroid = self.centroid()
        return Curve(
            samples=self.samples - centroid,
            arc_params=self.arc_params,
            length=self.length,
            closed=self.closed,
            center_shift=self.center_shift + centroid,
        )

    def reversed(self) -> "Curve":
        """Return the same curve traversed the other way, keeping sample 0 in place."""
        order = (-np.arange(self.n_samples)) % self.n_samples
        return Curve(
            samples=self.samples[order],
            arc_params=self.arc_params,
            length=self.length,
            closed=self.closed,
            center_shift=self.center_shift,
        )

    def content_hash(self) -> str:
        """Stable hash of the sample positions."""
        digest = hashlib.sha256(np.ascontiguousarray(self.samples).tobytes())
        digest.update(np.float64(self.length).tobytes())
        return digest.hexdigest()


class Frame(ArrayModel):
    """Orthonormal frame (s1, s2, τ) attached to each curve sample, with s1 ∧ s2 = τ."""

    s1: np.ndarray
    s2: np.ndarray
    tau: np.ndarray
    arc_params: np.ndarray
    length: float
    holonomy: float = 0.0
    twist_rate: float = 0.0

    @field_validator("s1", "s2", "tau", mode="before")
    @classmethod
    def validate_vectors(cls, v: Any) -> np.ndarray:
        """Frame vectors are (N, 3) arrays."""
        return as_float_array(v, "frame vectors", (None, 3))

    @field_validator("arc_params", mode="before")
    @classmethod
    def validate_arc_params(cls, v: Any) -> np.ndarray:
        """Arc parameters are a 1D array."""
        return as_float_array(v, "arc_params", (None,))

    @model_validator(mode="after")
    def validate_orthonormal(self) -> "Frame":
        """Every triple is orthonormal and right-handed."""
        stacked = np.stack([self.s1, self.s2, self.tau], axis=1)
        gram = np.einsum("nik,njk->nij", stacked, stacked)
        if np.max(np.abs(gram - np.eye(3))) > 1e-9:
            raise ValueError("Frame triples are not orthonormal")
        if np.max(np.abs(np.cross(self.s1, self.s2) - self.tau)) > 1e-9:
            raise ValueError("Frame triples must satisfy s1 ∧ s2 = tau")
        return self

    @cached_property
    def s2_spline(self) -> CubicSpline:
        knots = np.append(self.arc_params, self.length)
        values = np.vstack([self.s2, self.s2[:1]])
        return CubicSpline(knots, values, axis=0, bc_type="periodic")

    def evaluate(self, curve: Curve, t: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Frame at arbitrary arc parameters.

        s2 is interpolated and projected orthogonally to the curve tangent at t, so the
        returned triple is exactly orthonormal with τ equal to the curve tangent there.
        """
        s = np.mod(np.asarray(t, dtype=np.float64), self.length)
        tau = curve.evaluate(s)[1]
        s2 = self.s2_spline(s)
        s2 = s2 - np.sum(s2 * tau, axis=-1, keepdims=True) * tau
        s2 = s2 / np.linalg.norm(s2, axis=-1, keepdims=True)
        s1 = np.cross(s2, tau)
        return s1, s2, tau

    def rotated(self, angle: float) -> "Frame":
        """Rotate every (s1, s2) pair about τ by a constant angle."""
        c, s = np.cos(angle), np.sin(angle)
        return Frame(
            s1=c * self.s1 + s * self.s2,
            s2=-s * self.s1 + c * self.s2,
            tau=self.tau,
            arc_params=self.arc_params,
            length=self.length,
            holonomy=self.holonomy,
            twist_rate=self.twist_rate,
        )


class PanelQuadrature(NamedTuple):
    """Sub-panel quadrature nodes on the exact tube surface, shape (P, q², ...)."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray


class TubeMesh(ArrayModel):
    """
    Quadrilateral panels on the tube of radius eps around a curve.

    Panel p = j * n_theta + k covers t in [j, j + 1) * L / n_t and
    theta in [k, k + 1) * 2π / n_theta. Normals point into the solid.
    """

    curve: Curve
    frame: Frame
    eps: float
    n_t: int
    n_theta: int
    centroids: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    areas: np.ndarray
    t_values: np.ndarray
    theta_values: np.ndarray
    t_index: np.ndarray
    theta_index: np.ndarray
    panel_lengths: np.ndarray
    panel_widths: np.ndarray
    vertices: np.ndarray
    faces: np.ndarray

    _quadrature: Dict[int, PanelQuadrature] = PrivateAttr(default_factory=dict)

    @property
    def n_panels(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dt(self) -> float:
        return self.curve.length / self.n_t

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @cached_property
    def e_theta(self) -> np.ndarray:
        """Unit vectors n ∧ τ at the centroids."""
        return np.cross(self.normals, self.tangents)

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.hypot(self.panel_lengths, self.panel_widths)

    @cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def panel_index(self, j: int, k: int) -> int:
        return (j % self.n_t) * self.n_theta + (k % self.n_theta)

    def locate(self, point: Any, tol: float = 1e-9) -> Optional[int]:
        """Index of the panel whose centroid coincides with point, if any."""
        distance, index = self.kdtree.query(np.asarray(point, dtype=np.float64))
        if distance > tol * self.curve.length:
            return None
        return int(index)

    def quadrature(self, q: int) -> PanelQuadrature:
        """
        q × q midpoint sub-rule on each panel, placed on the exact tube surface.

        Weights include the area element eps (1 - eps κ·r̂) dθ dt and sum to the
        panel areas to second order.
        """
        if q in self._quadrature:
            return self._quadrature[q]
        offsets = (np.arange(q) + 0.5) / q - 0.5
        t_sub = self.t_values[:, None] + offsets[None, :] * self.dt
        theta_sub = self.theta_values[:, None] + offsets[None, :] * self.dtheta
        # (P, q) along t and (P, q) along theta -> (P, q, q)
        position, _, curvature = self.curve.evaluate(t_sub)
        s1, s2, _ = self.frame.evaluate(self.curve, t_sub)
        cos_t = np.cos(theta_sub)[:, None, :, None]
        sin_t = np.sin(theta_sub)[:, None, :, None]
        radial = cos_t * s1[:, :, None, :] + sin_t * s2[:, :, None, :]
        points = position[:, :, None, :] + self.eps * radial
        stretch = 1.0 - self.eps * np.sum(curvature[:, :, None, :] * radial, axis=-1)
        weights = self.eps * (self.dtheta / q) * (self.dt / q) * stretch
        n = self.n_panels
        rule = PanelQuadrature(
            points=points.reshape(n, q * q, 3),
            normals=-radial.reshape(n, q * q, 3),
            weights=weights.reshape(n, q * q),
        )
        self._quadrature[q] = rule
        return rule


class TubeCoords(BaseModel):
    """Tube coordinates x = γ(t) + a s1(t) + b s2(t) and the Jacobian factor w = ∂_τ t."""

    t: float
    a: float
    b: float
    w: float

    @property
    def distance(self) -> float:
        return float(np.hypot(self.a, self.b))
