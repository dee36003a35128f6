"""
Tests for B*, 𝓑[u], Γ_g, Γ_a and the coefficient set.
"""

import numpy as np
import pytest

from rigid_filament.models.base import as_vector3, cross_matrix, split_p
from rigid_filament.models.coefficients import CoefficientSet, InertiaSpec
from rigid_filament.models.fields import SurfaceField, VortexParticleCloud
from rigid_filament.numerics.coefficients import (
    bstar_matrix,
    build_coefficients,
    calB_matrix,
    calD,
    calD_star,
    export_coefficients,
    gamma_a,
    gamma_g,
    lamb_residual,
    total_energy,
)
from rigid_filament.numerics.geometry import tube_mesh
from rigid_filament.numerics.kernels import RigidField, h2d_field
from rigid_filament.numerics.neumann import kirchhoff_system


def test_bstar_blocks(unit_circle) -> None:
    """Test B* of the centred circle: A0 blocks off the diagonal and a zero V0 block."""
    b = bstar_matrix(unit_circle)
    area = cross_matrix(np.array([0.0, 0.0, np.pi]))
    assert np.allclose(b, -b.T)
    assert np.allclose(b[:3, :3], 0.0)
    assert np.allclose(b[:3, 3:], area, atol=1e-12)
    assert np.allclose(b[3:, :3], area, atol=1e-12)
    assert np.allclose(b[3:, 3:], 0.0, atol=1e-12)


def test_bstar_translated_circle(unit_circle) -> None:
    """Test the volume block of the translated circle is [-π e2]×."""
    b = bstar_matrix(unit_circle.translated([1.0, 0.0, 0.0]))
    assert np.allclose(b[3:, 3:], cross_matrix(np.array([0.0, -np.pi, 0.0])), atol=1e-12)


def test_calB_of_h2d_approaches_bstar(unit_circle, circle_frame, small_mesh) -> None:
    """Test 𝓑[H_2D] is skew and gets closer to B* as the tube thins."""
    bstar = bstar_matrix(unit_circle)
    thin = tube_mesh(unit_circle, circle_frame, 0.05, 64, 16)
    coarse_error = np.max(np.abs(calB_matrix(small_mesh, h2d_field(small_mesh)) - bstar))
    thin_b = calB_matrix(thin, h2d_field(thin))
    assert np.allclose(thin_b, -thin_b.T)
    thin_error = np.max(np.abs(thin_b - bstar))
    assert thin_error < coarse_error
    assert coarse_error < 0.5


def test_rigid_field_splits_p() -> None:
    """Test the rigid field reads ℓ and Ω from the two halves of p."""
    p = np.array([1.0, 2.0, 3.0, 0.0, 0.0, 2.0])
    ell, omega = split_p(p)
    assert np.array_equal(ell, [1.0, 2.0, 3.0])
    assert np.array_equal(omega, [0.0, 0.0, 2.0])
    field = RigidField(p)
    assert np.allclose(field(np.array([[1.0, 0.0, 0.0]])).value, [[1.0, 4.0, 3.0]])


def test_as_vector3() -> None:
    """Test 3-vectors are read-only and other shapes are rejected."""
    vector = as_vector3([1, 2, 3], "h")
    assert vector.dtype == np.float64
    assert not vector.flags.writeable
    with pytest.raises(ValueError, match="h must have shape"):
        as_vector3([1.0, 2.0], "h")


def test_gamma_g() -> None:
    """Test Γ_g = -(m ℓ ∧ Ω, J0 Ω ∧ Ω) and its density scaling."""
    inertia = InertiaSpec(m=2.0)
    p = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.5])
    expected = -np.concatenate(
        [2.0 * np.cross(p[:3], p[3:]), np.cross(inertia.j0 @ p[3:], p[3:])]
    )
    assert np.allclose(gamma_g(inertia, p), expected)
    scaled = InertiaSpec(m=2.0, scaling_mode="density")
    assert np.allclose(gamma_g(scaled, p, eps=0.1), 0.01 * expected)
    with pytest.raises(ValueError):
        gamma_g(scaled, p)


def test_gamma_g_does_no_work() -> None:
    """Test p · Γ_g(p, p) = 0."""
    p = np.array([0.3, -1.0, 0.2, 0.7, 0.1, -0.4])
    assert abs(p @ gamma_g(InertiaSpec(), p)) < 1e-14


def test_limit_coefficients(unit_circle) -> None:
    """Test the limit coefficient set has no added mass."""
    inertia = InertiaSpec()
    coeffs = build_coefficients(inertia, bstar_matrix(unit_circle))
    assert not np.any(coeffs.Ma)
    assert np.allclose(coeffs.total_mass, inertia.mass_matrix())
    p = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 2.0])
    assert total_energy(coeffs, p) == pytest.approx(0.5 * (1.0 + 2.0 * 4.0))


def test_coefficient_set_rejects_symmetric_b() -> None:
    """Test a B that is not skew is rejected."""
    with pytest.raises(ValueError):
        CoefficientSet(
            Mg=np.eye(6),
            Ma=np.zeros((6, 6)),
            B=np.eye(6),
            gamma_a_tensor=np.zeros((6, 6, 6)),
            inertia=InertiaSpec(),
        )


def test_inertia_rejects_bad_j0() -> None:
    """Test J0 must be symmetric positive definite."""
    with pytest.raises(ValueError):
        InertiaSpec(J0=[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        InertiaSpec(J0=[[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def test_calD_of_empty_cloud() -> None:
    """Test the vortical forcing of an empty cloud vanishes."""
    cloud = VortexParticleCloud.empty()
    assert not np.any(calD_star(cloud, RigidField(np.zeros(6))))
    assert not np.any(calD(None, None, np.zeros(6), cloud, RigidField(np.zeros(6))))


def test_calD_without_kirchhoff_equals_calD_star() -> None:
    """Test calD reduces to calD_star without Kirchhoff potentials."""
    cloud = VortexParticleCloud(
        positions=[[0.0, 0.0, -3.0], [0.5, 0.0, -3.0]],
        alphas=[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
        delta=0.1,
    )
    field = RigidField(np.array([0.0, 0.0, 1.0, 0.3, 0.0, 0.0]))
    assert np.allclose(calD(None, None, np.zeros(6), cloud, field), calD_star(cloud, field))


def test_lamb_residual_constant_fields(small_mesh) -> None:
    """Test the identity holds for a uniform flow."""
    uniform = RigidField(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
    for i in range(1, 7):
        assert lamb_residual(small_mesh, uniform, uniform, i) < 1e-10
    with pytest.raises(ValueError):
        lamb_residual(small_mesh, uniform, uniform, 0)


@pytest.mark.slow
def test_eps_coefficients_structure(small_mesh, small_solver, tmp_path) -> None:
    """Test the tube coefficient set is skew where it should be and exports cleanly."""
    kirchhoff = kirchhoff_system(small_mesh, small_solver)
    b = calB_matrix(small_mesh, h2d_field(small_mesh))
    coeffs = build_coefficients(InertiaSpec(), b, small_mesh, kirchhoff, small_mesh.eps)
    for i in range(6):
        assert np.allclose(coeffs.gamma_a_tensor[i], -coeffs.gamma_a_tensor[i].T)
    path = export_coefficients(coeffs, tmp_path / "coefficients.txt")
    text = path.read_text()
    assert "[Mg]" in text and "[Ma]" in text and "[GammaA[6]]" in text


def test_calB_is_skew_for_random_fields(small_mesh) -> None:
    """Test 𝓑[u] is skew and does no work for arbitrary surface fields."""
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = SurfaceField(vectors=rng.normal(size=(small_mesh.n_panels, 3)))
        b = calB_matrix(small_mesh, u)
        p = rng.normal(size=6)
        assert np.array_equal(b.T, -b)
        assert abs(p @ b @ p) <= 1e-12 * (p @ p) * np.linalg.norm(b)


def test_gamma_a_does_no_work(small_mesh) -> None:
    """Test p · ⟨Γ_a, p, p⟩ vanishes for skew 𝓑 slices built from surface fields."""
    rng = np.random.default_rng(3)
    fields = [SurfaceField(vectors=rng.normal(size=(small_mesh.n_panels, 3))) for _ in range(6)]
    tensor = np.stack([calB_matrix(small_mesh, u) for u in fields])
    coeffs = CoefficientSet(
        Mg=np.eye(6),
        Ma=np.zeros((6, 6)),
        B=np.zeros((6, 6)),
        gamma_a_tensor=tensor,
        inertia=InertiaSpec(),
    )
    p = rng.normal(size=6)
    force = gamma_a(coeffs, p)
    assert abs(p @ force) <= 1e-10 * np.linalg.norm(p) ** 2 * np.linalg.norm(force)
