"""
Coefficients of the reduced Newton equations.
"""

import logging
from pathlib import Path
from typing import Any, NamedTuple, Optional, Union

import numpy as np

from ..errors import IOFailure, SupportTooClose
from ..models.base import cross_matrix, split_p
from ..models.coefficients import CoefficientSet, InertiaSpec, KirchhoffSet
from ..models.fields import SurfaceField, VortexParticleCloud
from ..models.geometry import Curve, TubeMesh
from .geometry import area_volume_vectors
from .neumann import KirchhoffField, rigid_modes

logger = logging.getLogger(__name__)


def triple(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Row-wise triple product [a, b, c] = a · (b ∧ c)."""
    return np.asarray(np.sum(a * np.cross(b, c), axis=-1))


def gamma_g(inertia: InertiaSpec, p: Any, eps: Optional[float] = None) -> np.ndarray:
    """⟨Γ_g, p, p⟩ = -(m ℓ ∧ Ω, (J0 Ω) ∧ Ω), with the density scaling applied when active."""
    p = np.asarray(p, dtype=np.float64)
    m, j0 = inertia.effective(eps)
    ell, omega = split_p(p)
    return -np.concatenate([m * np.cross(ell, omega), np.cross(j0 @ omega, omega)])


def calB_matrix(mesh: TubeMesh, u: SurfaceField) -> np.ndarray:
    """
    𝓑[u]_ij = Σ_panels [ζ_j, ζ_i, u ∧ n] area at the panel centroids.

    The result is antisymmetrized, so it is skew to the last bit.
    """
    modes = rigid_modes(mesh.centroids)
    u_cross_n = np.cross(u.vectors, mesh.normals)
    inner = np.cross(modes, u_cross_n[None, :, :])
    matrix = np.einsum("jpa,ipa,p->ij", modes, inner, mesh.areas)
    return np.asarray(0.5 * (matrix - matrix.T))


def bstar_matrix(curve: Curve) -> np.ndarray:
    """
    Limit matrix B* built from the area and volume vectors.

    Blocks: [[0, A0∧·], [A0∧·, V0∧·]], skew-symmetric.
    """
    a0, v0 = area_volume_vectors(curve)
    b = np.zeros((6, 6))
    b[:3, 3:] = cross_matrix(a0)
    b[3:, :3] = cross_matrix(a0)
    b[3:, 3:] = cross_matrix(v0)
    return b


def gamma_a_tensor(mesh: TubeMesh, kirchhoff: KirchhoffSet) -> np.ndarray:
    """The six matrices 𝓑[∇Φ_i], shape (6, 6, 6)."""
    return np.stack(
        [
            calB_matrix(mesh, SurfaceField(vectors=kirchhoff.surface_gradients[i]))
            for i in range(6)
        ]
    )


def gamma_a(coeffs: CoefficientSet, p: Any) -> np.ndarray:
    """⟨Γ_a, p, p⟩ = -Σ_i p_i 𝓑[∇Φ_i] p."""
    p = np.asarray(p, dtype=np.float64)
    return -np.einsum("i,ijk,k->j", p, coeffs.gamma_a_tensor, p)


def calD_star(cloud: VortexParticleCloud, u_eval: Any) -> np.ndarray:
    """Particle quadrature of ∫ [ζ_i, ω, u] dx."""
    if cloud.is_empty:
        return np.zeros(6)
    u = u_eval(cloud.positions).value
    modes = rigid_modes(cloud.positions)
    return np.array([np.sum(triple(modes[i], cloud.alphas, u)) for i in range(6)])


def calD(
    mesh: Optional[TubeMesh],
    kirchhoff: Optional[KirchhoffField],
    p: Any,
    cloud: VortexParticleCloud,
    u_eval: Any,
    separation_floor: float = 0.0,
) -> np.ndarray:
    """
    Particle quadrature of ∫ [ζ_i, ω, u] dx - ∫ [ω, u - u_S, ∇Φ_i] dx.

    Without Kirchhoff potentials the second sum vanishes and this equals calD_star.

    Raises:
        SupportTooClose: The cloud is closer than separation_floor to the surface
    """
    if cloud.is_empty:
        return np.zeros(6)
    if mesh is not None and separation_floor > 0.0:
        separation = cloud.min_distance_to(mesh.centroids)
        if separation < separation_floor:
            raise SupportTooClose(
                f"Vorticity is {separation:.4g} from the body, floor {separation_floor:.4g}",
                separation,
            )
    p = np.asarray(p, dtype=np.float64)
    u = u_eval(cloud.positions).value
    modes = rigid_modes(cloud.positions)
    result = np.array([np.sum(triple(modes[i], cloud.alphas, u)) for i in range(6)])
    if kirchhoff is not None:
        relative = u - np.einsum("i,ima->ma", p, modes)
        grads, _ = kirchhoff.gradients(cloud.positions)
        result -= np.array([np.sum(triple(cloud.alphas, relative, grads[i])) for i in range(6)])
    return result


def total_energy(coeffs: CoefficientSet, p: Any) -> float:
    """½ p · (Mg + Ma) p."""
    p = np.asarray(p, dtype=np.float64)
    return float(0.5 * p @ coeffs.total_mass @ p)


def build_coefficients(
    inertia: InertiaSpec,
    B: np.ndarray,
    mesh: Optional[TubeMesh] = None,
    kirchhoff: Optional[KirchhoffSet] = None,
    eps: Optional[float] = None,
) -> CoefficientSet:
    """
    Coefficient set of the limit system (no Kirchhoff data) or of the eps-system.

    Args:
        inertia: Mass and inertia
        B: B* in the limit, 𝓑[H] for a tube
        mesh: Tube mesh, required with kirchhoff
        kirchhoff: Kirchhoff potentials of the tube
        eps: Tube radius, used by the density scaling
    """
    ma = np.zeros((6, 6))
    tensor = np.zeros((6, 6, 6))
    if kirchhoff is not None:
        if mesh is None:
            raise ValueError("Kirchhoff data needs its mesh")
        ma = kirchhoff.Ma
        tensor = gamma_a_tensor(mesh, kirchhoff)
    return CoefficientSet(
        Mg=inertia.mass_matrix(eps),
        Ma=ma,
        B=B,
        gamma_a_tensor=tensor,
        inertia=inertia,
        eps=eps,
    )


class VolumeNodes(NamedTuple):
    """Quadrature nodes of a fluid volume."""

    points: np.ndarray
    weights: np.ndarray


def lamb_residual(
    mesh: TubeMesh,
    u: Any,
    v: Any,
    i: int,
    nodes: Optional[VolumeNodes] = None,
) -> float:
    """
    Defect of the Lamb-type identity for ζ_i:

        ∫ (u·v) K_i dσ = ∫ ζ_i · ((u·n) v + (v·n) u) dσ + ∫ ζ_i · (u ∧ curl v + v ∧ curl u) dx

    Args:
        mesh: Tube mesh carrying the surface quadrature
        u: Field evaluator or SurfaceField trace of u
        v: Field evaluator or SurfaceField trace of v
        i: Mode index 1..6
        nodes: Volume nodes for the curl terms, omitted for curl-free fields

    Returns:
        |left - right|
    """
    if not 1 <= i <= 6:
        raise ValueError(f"Mode index must be in 1..6, got {i}")
    u_s = _surface_values(u, mesh)
    v_s = _surface_values(v, mesh)
    zeta = rigid_modes(mesh.centroids)[i - 1]
    k_i = np.sum(zeta * mesh.normals, axis=1)
    u_n = np.sum(u_s * mesh.normals, axis=1)
    v_n = np.sum(v_s * mesh.normals, axis=1)
    left = np.sum(np.sum(u_s * v_s, axis=1) * k_i * mesh.areas)
    right = np.sum(np.sum(zeta * (u_n[:, None] * v_s + v_n[:, None] * u_s), axis=1) * mesh.areas)
    if nodes is not None and len(nodes.weights):
        us = u(nodes.points, want_gradient=True)
        vs = v(nodes.points, want_gradient=True)
        zeta_nodes = rigid_modes(nodes.points)[i - 1]
        integrand = np.cross(us.value, vs.curl()) + np.cross(vs.value, us.curl())
        right += np.sum(np.sum(zeta_nodes * integrand, axis=1) * nodes.weights)
    return float(abs(left - right))


def _surface_values(field: Any, mesh: TubeMesh) -> np.ndarray:
    if isinstance(field, SurfaceField):
        return field.vectors
    return np.asarray(field(mesh.centroids).value)


def export_coefficients(coeffs: CoefficientSet, path: Union[str, Path]) -> Path:
    """
    Write Mg, Ma, B and the Γ_a tensor as a plain-text matrix bundle.

    Raises:
        IOFailure: File cannot be written
    """
    path = Path(path)
    blocks = [f"# coefficient bundle eps={coeffs.eps}"]
    named = [("Mg", coeffs.Mg), ("Ma", coeffs.Ma), ("B", coeffs.B)]
    named += [(f"GammaA[{i + 1}]", coeffs.gamma_a_tensor[i]) for i in range(6)]
    for name, matrix in named:
        blocks.append(f"[{name}]")
        blocks.extend(" ".join(f"{value: .16e}" for value in row) for row in matrix)
    try:
        path.write_text("\n".join(blocks) + "\n")
    except OSError as e:
        raise IOFailure(f"Cannot write coefficients to {path}: {e}")
    logger.debug(f"Wrote coefficient bundle {path}")
    return path
