"""
Scenario configuration models.
"""

import hashlib
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .coefficients import InertiaSpec

SCENARIOS = ("convergence", "trajectory", "divergence")


class CurveSpec(BaseModel):
    """Centreline of the filament: a named built-in or a table of points."""

    kind: Literal["circle", "ellipse", "trefoil", "torus_knot", "table"] = Field(
        "circle", description="Built-in curve name, or 'table' to read points from `path`"
    )
    radius: float = Field(1.0, description="Circle radius")
    orientation: Literal["counterclockwise", "clockwise"] = Field(
        "counterclockwise", description="Circle traversal seen from +e3"
    )
    center: List[float] = Field(
        default_factory=lambda: [0.0, 0.0, 0.0], description="Circle centre before recentring"
    )
    semi_axes: List[float] = Field(
        default_factory=lambda: [1.0, 0.7], description="Ellipse semi-axes (a, b)"
    )
    scale: float = Field(1.0, description="Trefoil scale factor")
    p: int = Field(2, description="Torus knot winding number around the axis")
    q: int = Field(3, description="Torus knot winding number through the hole")
    major_radius: float = Field(2.0, description="Torus knot major radius")
    minor_radius: float = Field(0.6, description="Torus knot minor radius")
    path: Optional[str] = Field(None, description="Point table (x y z rows) for kind 'table'")
    n_samples: int = Field(512, description="Arc-length samples of the resampled curve")
    vertices: int = Field(1024, description="Dense vertices generated for non-circle built-ins")

    @field_validator("radius", "scale", "major_radius", "minor_radius")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        """Lengths are positive."""
        if v <= 0.0:
            raise ValueError("Curve lengths must be positive")
        return v

    @field_validator("center")
    @classmethod
    def validate_center(cls, v: List[float]) -> List[float]:
        """Centre is a 3-vector."""
        if len(v) != 3:
            raise ValueError("center must have 3 components")
        return v

    @field_validator("semi_axes")
    @classmethod
    def validate_semi_axes(cls, v: List[float]) -> List[float]:
        """Two positive semi-axes."""
        if len(v) != 2 or min(v) <= 0.0:
            raise ValueError("semi_axes must be two positive numbers")
        return v

    @field_validator("n_samples")
    @classmethod
    def validate_n_samples(cls, v: int) -> int:
        """Enough samples for the arc-length resampler."""
        if v < 16:
            raise ValueError("n_samples must be at least 16")
        return v

    @model_validator(mode="after")
    def validate_table_path(self) -> "CurveSpec":
        """Tables need a path."""
        if self.kind == "table" and not self.path:
            raise ValueError("Curve kind 'table' needs a path")
        return self

    def min_curvature_radius(self) -> Optional[float]:
        """Closed-form minimum curvature radius where one is known."""
        if self.kind == "circle":
            return self.radius
        if self.kind == "ellipse":
            a, b = max(self.semi_axes), min(self.semi_axes)
            return b**2 / a
        return None


class VorticitySpec(BaseModel):
    """Initial vorticity in the fluid."""

    kind: Literal["none", "ring"] = Field("none", description="'ring' puts a swirl below the body")
    s0: float = Field(10.0, description="Distance of the swirl centre below the body")
    strength: float = Field(1.0, description="Maximum of the swirl profile, at most 1")
    core: float = Field(1.0, description="Support radius of the swirl profile")
    n_particles: int = Field(4096, description="Target number of particles")
    delta: Optional[float] = Field(None, description="Particle core radius, default the grid size")

    @field_validator("strength")
    @classmethod
    def validate_strength(cls, v: float) -> float:
        """The profile is bounded by one."""
        if not 0.0 < v <= 1.0:
            raise ValueError("strength must be in (0, 1]")
        return v

    @field_validator("s0", "core")
    @classmethod
    def validate_lengths(cls, v: float) -> float:
        """Lengths are positive."""
        if v <= 0.0:
            raise ValueError("Swirl lengths must be positive")
        return v

    @field_validator("n_particles")
    @classmethod
    def validate_n_particles(cls, v: int) -> int:
        """At least a minimal grid."""
        if v < 64:
            raise ValueError("n_particles must be at least 64")
        return v

    @field_validator("delta")
    @classmethod
    def validate_delta(cls, v: Optional[float]) -> Optional[float]:
        """Core radius is positive when given."""
        if v is not None and v <= 0.0:
            raise ValueError("delta must be positive")
        return v

    @model_validator(mode="after")
    def validate_separation(self) -> "VorticitySpec":
        """The swirl support stays below the body."""
        if self.kind == "ring" and self.core >= self.s0:
            raise ValueError("Swirl core must be smaller than s0")
        return self


class QuadratureSpec(BaseModel):
    """Panel quadrature used by the boundary element solver."""

    far_ratio: float = Field(3.0, description="Centroid rule beyond this many panel diameters")
    medium_ratio: float = Field(1.5, description="4x4 sub-rule beyond this many diameters")
    near_ratio: float = Field(0.75, description="8x8 sub-rule beyond this, 16x16 below")
    self_gauss: int = Field(16, description="Gauss points per triangle of the self-panel rule")
    offset_fraction: float = Field(
        0.25, description="Offset of the gradient recovery points, in panel widths"
    )

    @model_validator(mode="after")
    def validate_ratios(self) -> "QuadratureSpec":
        """Ratios decrease from far to near."""
        if not self.far_ratio > self.medium_ratio > self.near_ratio > 0.0:
            raise ValueError("Quadrature ratios must satisfy far > medium > near > 0")
        if not 0.0 < self.offset_fraction <= 1.0:
            raise ValueError("offset_fraction must be in (0, 1]")
        return self


class MeshSpec(BaseModel):
    """Tube mesh resolution."""

    n_theta: int = Field(16, description="Panels around each cross-section")
    n_t: Optional[int] = Field(None, description="Panels along the curve, default from aspect")
    aspect: float = Field(2.0, description="Target panel length over panel width")
    n_t_min: int = Field(64, description="Lower bound of the automatic n_t")
    n_t_max: int = Field(256, description="Upper bound of the automatic n_t")
    curve_oversampling: int = Field(8, description="Filament quadrature nodes per curve sample")
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)

    @field_validator("n_theta")
    @classmethod
    def validate_n_theta(cls, v: int) -> int:
        """At least 8 panels per cross-section."""
        if v < 8:
            raise ValueError("n_theta must be at least 8")
        return v

    @field_validator("n_t", "n_t_min")
    @classmethod
    def validate_n_t(cls, v: Optional[int]) -> Optional[int]:
        """At least 32 panels along the curve."""
        if v is not None and v < 32:
            raise ValueError("n_t must be at least 32")
        return v

    @model_validator(mode="after")
    def validate_bounds(self) -> "MeshSpec":
        """n_t_min <= n_t_max."""
        if self.n_t_min > self.n_t_max:
            raise ValueError("n_t_min must not exceed n_t_max")
        return self

    def resolve_n_t(self, length: float, eps: float) -> int:
        """Panels along a curve of the given length for tube radius eps."""
        if self.n_t is not None:
            return self.n_t
        width = eps * 2.0 * math.pi / self.n_theta
        wanted = math.ceil(length / (self.aspect * width))
        return int(min(self.n_t_max, max(self.n_t_min, wanted)))


class NumericsSpec(BaseModel):
    """Solver tolerances and run control."""

    tol_compat: float = Field(1e-6, description="Relative flux tolerance of Neumann data")
    residual_tol: float = Field(1e-10, description="Relative residual bound of the linear solve")
    separation_floor: Optional[float] = Field(
        None, description="Minimum vorticity-body distance, default 3 eps or 0.05 L"
    )
    reflection_stride: int = Field(1, description="Steps between reflection field solves")
    output_stride: int = Field(10, description="Steps between time series rows")
    cache_dir: Optional[str] = Field(None, description="Directory of the matrix cache")

    @field_validator("reflection_stride", "output_stride")
    @classmethod
    def validate_stride(cls, v: int) -> int:
        """Strides are positive."""
        if v < 1:
            raise ValueError("Strides must be at least 1")
        return v


class ProbeSpec(BaseModel):
    """Probe points for velocity field comparisons."""

    distance: float = Field(1.0, description="Distance of the probes from the curve")
    count: int = Field(8, description="Number of probes spread along the curve")


class OutputSpec(BaseModel):
    """Where and what to write."""

    directory: str = Field("results", description="Output directory")
    plots: bool = Field(True, description="Write SVG plots")
    export_mesh: bool = Field(False, description="Write an OBJ file of every mesh")
    export_coefficients: bool = Field(True, description="Write the coefficient bundle")


class ScenarioConfig(BaseModel):
    """Complete description of one scenario run."""

    scenario: str = Field(..., description="One of: " + ", ".join(SCENARIOS))
    curve: CurveSpec = Field(default_factory=CurveSpec)
    eps_list: List[float] = Field(
        default_factory=lambda: [0.2, 0.1, 0.05], description="Tube radii of the sweep"
    )
    inertia: InertiaSpec = Field(default_factory=InertiaSpec)
    mu: float = Field(1.0, description="Circulation around the filament")
    p0: List[float] = Field(
        default_factory=lambda: [0.0] * 6, description="Initial body velocity (l, Omega)"
    )
    reference_p: List[float] = Field(
        default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        description="Body velocity used for Gamma_a magnitudes",
    )
    vorticity: VorticitySpec = Field(default_factory=VorticitySpec)
    dt: float = Field(1e-3, description="Time step")
    T: float = Field(1.0, description="Final time")
    mesh: MeshSpec = Field(default_factory=MeshSpec)
    numerics: NumericsSpec = Field(default_factory=NumericsSpec)
    probes: ProbeSpec = Field(default_factory=ProbeSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = Field(0, description="Random seed")

    @field_validator("scenario")
    @classmethod
    def validate_scenario(cls, v: str) -> str:
        """Scenario name is known."""
        if v not in SCENARIOS:
            raise ValueError(f"Unknown scenario '{v}', valid names: {', '.join(SCENARIOS)}")
        return v

    @field_validator("eps_list")
    @classmethod
    def validate_eps_list(cls, v: List[float]) -> List[float]:
        """Radii are positive and strictly decreasing."""
        if not v:
            raise ValueError("eps_list must not be empty")
        if min(v) <= 0.0:
            raise ValueError("eps_list entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        return v

    @field_validator("p0", "reference_p")
    @classmethod
    def validate_p(cls, v: List[float]) -> List[float]:
        """Body velocities have 6 components."""
        if len(v) != 6:
            raise ValueError("Body velocities must have 6 components")
        return v

    @field_validator("dt", "T")
    @classmethod
    def validate_time(cls, v: float) -> float:
        """Times are positive."""
        if v <= 0.0:
            raise ValueError("dt and T must be positive")
        return v

    @model_validator(mode="after")
    def validate_scenario_preconditions(self) -> "ScenarioConfig":
        """Check what the chosen scenario needs before anything is computed."""
        radius = self.curve.min_curvature_radius()
        if radius is not None and max(self.eps_list) >= 0.5 * radius:
            raise ValueError(
                f"eps {max(self.eps_list)} must be below half the minimum curvature radius {radius}"
            )
        if self.scenario == "convergence" and len(self.eps_list) < 3:
            raise ValueError("The convergence study needs at least 3 values in eps_list")
        if self.scenario == "divergence":
            if self.curve.kind != "circle":
                raise ValueError("The divergence experiment runs on a circle")
            if self.vorticity.kind != "ring":
                raise ValueError("The divergence experiment needs ring vorticity")
            if self.inertia.scaling_mode != "density":
                raise ValueError("The divergence experiment uses the density scaling mode")
        if self.scenario == "trajectory" and self.inertia.scaling_mode != "massive":
            raise ValueError("The trajectory comparison needs the massive scaling mode")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        return self

    def content_hash(self) -> str:
        """Stable hash of the configuration."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()
