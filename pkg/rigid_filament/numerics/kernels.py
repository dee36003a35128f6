"""
Free-space Biot-Savart evaluation for filaments and regularized vortex particles.

Every evaluator takes a batch of points (M, 3) and returns a FieldSample whose
gradient is the analytic Jacobian of the kernel sum.
"""

import logging
from typing import Any, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import ellipe, ellipk

from ..errors import InvalidRadius, NotOnSurface, SingularEvaluation
from ..models.base import cross_matrix, split_p
from ..models.fields import FieldSample, SurfaceField, VortexParticleCloud
from ..models.geometry import Curve, TubeMesh

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
# source-target pairs evaluated per chunk
CHUNK_PAIRS = 2_000_000


def _as_points(x: Any) -> Tuple[np.ndarray, bool]:
    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    return np.atleast_2d(points), single


def chunk_slices(n_targets: int, n_sources: int) -> List[slice]:
    """Target slices keeping each chunk below CHUNK_PAIRS source-target pairs."""
    size = max(1, CHUNK_PAIRS // max(1, n_sources))
    return [slice(start, min(n_targets, start + size)) for start in range(0, n_targets, size)]


def cross_matrices(vectors: np.ndarray) -> np.ndarray:
    """Stack of [v]× matrices, shape (N, 3, 3)."""
    out = np.zeros(vectors.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -vectors[..., 2], vectors[..., 1]
    out[..., 1, 0], out[..., 1, 2] = vectors[..., 2], -vectors[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -vectors[..., 1], vectors[..., 0]
    return out


def _vortex_sum(
    sources: np.ndarray,
    strengths: np.ndarray,
    points: np.ndarray,
    core: float,
    want_gradient: bool,
) -> FieldSample:
    """
    Sum of (1/4π) s ∧ r / ρ³ with r = x - y and ρ² = |r|² + core².

    The Jacobian of one term is [s]× / ρ³ - 3 (s ∧ r) rᵀ / ρ⁵.
    """
    n = points.shape[0]
    value = np.zeros((n, 3))
    gradient = np.zeros((n, 3, 3)) if want_gradient else None
    if sources.shape[0] == 0:
        return FieldSample(value=value, gradient=gradient)
    skews = cross_matrices(strengths) if want_gradient else None
    for chunk in chunk_slices(n, sources.shape[0]):
        r = points[chunk, None, :] - sources[None, :, :]
        rho2 = np.einsum("mna,mna->mn", r, r) + core**2
        inv3 = rho2**-1.5
        s_cross_r = np.cross(strengths[None, :, :], r)
        value[chunk] = np.einsum("mna,mn->ma", s_cross_r, inv3) / FOUR_PI
        if gradient is not None:
            skew = np.einsum("mn,nab->mab", inv3, skews)
            outer = np.einsum("mna,mnb,mn->mab", s_cross_r, r, inv3 / rho2)
            gradient[chunk] = (skew - 3.0 * outer) / FOUR_PI
    return FieldSample(value=value, gradient=gradient)


def curve_nodes(curve: Curve, oversampling: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Trapezoid nodes of a curve measure: positions and weighted tangents τ ds.

    Args:
        curve: Closed curve
        oversampling: Nodes per curve sample (>= 1)
    """
    if oversampling <= 1:
        return curve.samples, curve.tangents * curve.spacing
    n = curve.n_samples * oversampling
    params = curve.length * np.arange(n) / n
    position, tangent, _ = curve.evaluate(params)
    return position, tangent * (curve.length / n)


def biot_savart_curve(
    curve: Curve,
    circulation: float,
    x: Any,
    want_gradient: bool = False,
    oversampling: int = 1,
) -> Any:
    """
    Velocity induced by a closed filament carrying a circulation.

    Composite trapezoid evaluation of (Γ/4π) ∮ γ' ∧ (x - γ) / |x - γ|³ ds.

    Args:
        curve: Source curve
        circulation: Circulation Γ
        x: Point (3,) or batch of points (M, 3)
        want_gradient: Also return the Jacobian
        oversampling: Quadrature nodes per curve sample

    Returns:
        A 3-vector for a single point without gradient, otherwise a FieldSample

    Raises:
        SingularEvaluation: A point lies on the curve
    """
    points, single = _as_points(x)
    nodes, weighted_tangents = curve_nodes(curve, oversampling)
    distances = curve.distance_to(points)
    if np.min(distances) < 1e-12 * curve.length:
        raise SingularEvaluation(
            f"Biot-Savart evaluation at distance {np.min(distances):.3g} from the filament"
        )
    sample = _vortex_sum(nodes, circulation * weighted_tangents, points, 0.0, want_gradient)
    if single and not want_gradient:
        return sample.value[0]
    return sample


def biot_savart_particles(
    cloud: VortexParticleCloud, x: Any, want_gradient: bool = False
) -> FieldSample:
    """
    Velocity of a regularized particle cloud with the Rosenhead-Moore kernel.

    u(x) = (1/4π) Σ α_k ∧ (x - y_k) / (|x - y_k|² + δ²)^{3/2}
    """
    points, _ = _as_points(x)
    return _vortex_sum(cloud.positions, cloud.alphas, points, cloud.delta, want_gradient)


class CurveField:
    """Filament field Γ K[κ] as a field evaluator."""

    def __init__(self, curve: Curve, circulation: float = 1.0, oversampling: int = 1):
        self.curve = curve
        self.circulation = circulation
        self.oversampling = oversampling

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        return biot_savart_curve(  # type: ignore[no-any-return]
            self.curve, self.circulation, np.atleast_2d(points), want_gradient, self.oversampling
        )


class ParticleField:
    """Regularized particle field K[ω] as a field evaluator."""

    def __init__(self, cloud: VortexParticleCloud):
        self.cloud = cloud

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        return biot_savart_particles(self.cloud, points, want_gradient)


class RigidField:
    """Rigid velocity u_S = ℓ + Ω ∧ x."""

    def __init__(self, p: np.ndarray):
        self.ell, self.omega = split_p(np.asarray(p, dtype=np.float64))

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        points = np.atleast_2d(points)
        value = self.ell + np.cross(self.omega, points)
        gradient = None
        if want_gradient:
            gradient = np.broadcast_to(cross_matrix(self.omega), (points.shape[0], 3, 3))
        return FieldSample(value=value, gradient=gradient)


class SumField:
    """Pointwise sum of field evaluators, skipping None entries."""

    def __init__(self, *fields: Optional[Any]):
        self.fields = [f for f in fields if f is not None]

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        points = np.atleast_2d(points)
        total = FieldSample.zeros(points.shape[0], want_gradient)
        for field in self.fields:
            total = total + field(points, want_gradient)
        return total


class ScaledField:
    """A field evaluator multiplied by a constant."""

    def __init__(self, field: Any, factor: float):
        self.field = field
        self.factor = factor

    def __call__(self, points: np.ndarray, want_gradient: bool = False) -> FieldSample:
        return self.field(points, want_gradient).scaled(self.factor)


def h2d(surface_point: Any, mesh: TubeMesh) -> np.ndarray:
    """
    Local cross-section field (1/(2πε)) e_θ with e_θ = n ∧ τ at a panel centroid.

    Raises:
        NotOnSurface: The point is not a panel centroid of the mesh
    """
    index = mesh.locate(surface_point)
    if index is None:
        raise NotOnSurface("h2d is only defined at panel centroids of the mesh")
    return np.asarray(mesh.e_theta[index] / (2.0 * np.pi * mesh.eps))


def h2d_field(mesh: TubeMesh) -> SurfaceField:
    """H_2D at every panel centroid."""
    return SurfaceField(vectors=mesh.e_theta / (2.0 * np.pi * mesh.eps))


def ring_axis_oracle(R: float, z: float) -> np.ndarray:
    """
    On-axis field of a counterclockwise circular ring of unit circulation.

    Raises:
        InvalidRadius: R is not positive
    """
    if R <= 0.0:
        raise InvalidRadius(f"Ring radius must be positive, got {R}")
    return np.array([0.0, 0.0, R**2 / (2.0 * (R**2 + z**2) ** 1.5)])


def ring_field_exact(
    R: float,
    x: Any,
    circulation: float = 1.0,
    center: Any = (0.0, 0.0, 0.0),
    orientation: str = "counterclockwise",
) -> np.ndarray:
    """
    Field of a circular ring in a horizontal plane anywhere off the ring.

    Uses complete elliptic integrals of the first and second kind.

    Returns:
        (M, 3) velocities, or (3,) for a single point
    """
    if R <= 0.0:
        raise InvalidRadius(f"Ring radius must be positive, got {R}")
    points, single = _as_points(x)
    local = points - np.asarray(center, dtype=np.float64)
    rho = np.hypot(local[:, 0], local[:, 1])
    z = local[:, 2]
    sum_sq = R**2 + rho**2 + z**2
    alpha2 = sum_sq - 2.0 * R * rho
    beta = np.sqrt(sum_sq + 2.0 * R * rho)
    if np.min(alpha2) <= 1e-24 * R**2:
        raise SingularEvaluation("Exact ring field evaluated on the ring")
    m = 1.0 - alpha2 / beta**2
    k_int, e_int = ellipk(m), ellipe(m)
    scale = circulation / np.pi
    u_z = scale / (2.0 * alpha2 * beta) * ((R**2 - rho**2 - z**2) * e_int + alpha2 * k_int)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_rho = np.where(
            rho > 1e-14 * R,
            scale * z / (2.0 * alpha2 * beta * rho) * (sum_sq * e_int - alpha2 * k_int),
            0.0,
        )
        cos_phi = np.where(rho > 0.0, local[:, 0] / np.where(rho > 0.0, rho, 1.0), 1.0)
        sin_phi = np.where(rho > 0.0, local[:, 1] / np.where(rho > 0.0, rho, 1.0), 0.0)
    value = np.stack([u_rho * cos_phi, u_rho * sin_phi, u_z], axis=1)
    if orientation == "clockwise":
        value = -value
    return value[0] if single else value


def ring_far_field_radial(r: float, x3: float, orientation: str = "clockwise") -> float:
    """Leading far-field radial component -3 r x3 / (4|x3|⁵) of a clockwise unit ring."""
    value = -3.0 * r * x3 / (4.0 * abs(x3) ** 5)
    return value if orientation == "clockwise" else -value


def filament_cloud(
    curve: Curve, circulation: float, n_particles: int, delta: float
) -> VortexParticleCloud:
    """Particles on a curve with weights Γ τ ds, a regularized copy of the filament."""
    params = curve.length * np.arange(n_particles) / n_particles
    position, tangent, _ = curve.evaluate(params)
    alphas = circulation * tangent * (curve.length / n_particles)
    return VortexParticleCloud(positions=position, alphas=alphas, delta=delta)


class SwirlData(NamedTuple):
    """Swirl cloud and the moment ∫ (x1² + x2²) η dx of its profile."""

    cloud: VortexParticleCloud
    moment: float


def bump_profile(points: np.ndarray, strength: float, core: float) -> np.ndarray:
    """Smooth bump η = strength · exp(1 - 1/(1 - |x|²/core²)), zero outside the core ball."""
    s = np.sum(points**2, axis=-1) / core**2
    inside = s < 1.0
    eta = np.zeros(s.shape)
    eta[inside] = strength * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return eta


def ring_vortex_cloud(
    s0: float,
    strength: float = 1.0,
    core: float = 1.0,
    n_particles: int = 4096,
    delta: Optional[float] = None,
) -> SwirlData:
    """
    Axisymmetric swirl ω(x) = η(x + s0 e3) (x2, -x1, 0) sampled on a cylindrical grid.

    The grid is uniform in azimuth, so the weights sum to zero and the cloud keeps its
    symmetry about the e3 axis. Cells where η vanishes are dropped.

    Args:
        s0: Distance of the swirl centre below the origin
        strength: Maximum of η, at most 1
        core: Support radius of η
        n_particles: Target number of grid cells before dropping empty ones
        delta: Core radius, default the radial cell size

    Returns:
        SwirlData with the cloud and ∫ (x1² + x2²) η dx
    """
    if not 0.0 < strength <= 1.0:
        raise ValueError("Swirl strength must be in (0, 1]")
    m = max(2, int(round((n_particles / 8.0) ** (1.0 / 3.0))))
    n_r, n_phi, n_z = m, 4 * m, 2 * m
    dr, dphi, dz = core / n_r, 2.0 * np.pi / n_phi, 2.0 * core / n_z
    r = (np.arange(n_r) + 0.5) * dr
    phi = (np.arange(n_phi) + 0.5) * dphi
    z = -core + (np.arange(n_z) + 0.5) * dz
    rr, pp, zz = np.meshgrid(r, phi, z, indexing="ij")
    local = np.stack([rr * np.cos(pp), rr * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    volume = (rr * dr * dphi * dz).reshape(-1)
    eta = bump_profile(local, strength, core)
    keep = eta > 0.0
    local, volume, eta = local[keep], volume[keep], eta[keep]
    swirl = np.stack([local[:, 1], -local[:, 0], np.zeros(len(local))], axis=1)
    positions = local - np.array([0.0, 0.0, s0])
    alphas = (eta * volume)[:, None] * swirl
    moment = float(np.sum((local[:, 0] ** 2 + local[:, 1] ** 2) * eta * volume))
    cloud = VortexParticleCloud(
        positions=positions, alphas=alphas, delta=dr if delta is None else delta
    )
    logger.debug(f"Swirl cloud with {cloud.n_particles} particles, moment {moment:.6g}")
    return SwirlData(cloud=cloud, moment=moment)
