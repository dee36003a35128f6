"""
Tests for the exterior Neumann solver, Kirchhoff potentials and the harmonic field.
"""

import numpy as np
import pytest

from rigid_filament.errors import CompatibilityViolation, SupportTooClose
from rigid_filament.models.fields import VortexParticleCloud
from rigid_filament.numerics.coefficients import calB_matrix
from rigid_filament.numerics.geometry import tube_mesh
from rigid_filament.numerics.kernels import biot_savart_particles, h2d_field
from rigid_filament.numerics.neumann import (
    NeumannSolver,
    cross_section_circulation,
    harmonic_field,
    kirchhoff_system,
    reflection_field,
    rigid_modes,
    self_panel_single_layer,
    solve_exterior_neumann,
)


def dipole_line_gradient(curve, points: np.ndarray) -> np.ndarray:
    """Gradient of the potential of e3-dipoles spread along the curve."""
    r = points[:, None, :] - curve.samples[None, :, :]
    d = np.linalg.norm(r, axis=-1)
    e3 = np.array([0.0, 0.0, 1.0])
    terms = e3 / d[..., None] ** 3 - 3.0 * r[..., 2:3] * r / d[..., None] ** 5
    return np.sum(terms, axis=1) * curve.spacing / (4 * np.pi)


def test_rigid_modes() -> None:
    """Test the six elementary rigid velocities."""
    modes = rigid_modes(np.array([[1.0, 2.0, 3.0]]))
    assert np.allclose(modes[0, 0], [1.0, 0.0, 0.0])
    assert np.allclose(modes[5, 0], np.cross([0.0, 0.0, 1.0], [1.0, 2.0, 3.0]))


def test_self_panel_square() -> None:
    """Test the self integral of a unit square is 4 ln(1 + √2) / (4π)."""
    expected = 4.0 * 0.5 * 2.0 * np.log(1.0 + np.sqrt(2.0)) / (4 * np.pi)
    assert float(self_panel_single_layer(1.0, 1.0)) == pytest.approx(expected, rel=1e-8)


def test_incompatible_data_rejected(small_mesh, small_solver) -> None:
    """Test data with net flux raises CompatibilityViolation."""
    with pytest.raises(CompatibilityViolation):
        small_solver.solve(np.ones(small_mesh.n_panels))


def test_zero_data_gives_zero_density(small_mesh, small_solver) -> None:
    """Test zero data is solved without touching the factorization."""
    assert not np.any(small_solver.solve(np.zeros(small_mesh.n_panels)).values)


def test_wrong_data_shape(small_solver) -> None:
    """Test data with the wrong length is rejected."""
    with pytest.raises(ValueError):
        small_solver.solve(np.zeros(5))


@pytest.mark.slow
def test_exterior_field_of_dipole_line(unit_circle, small_mesh, small_solver) -> None:
    """Test the solved exterior field against a line of dipoles inside the tube."""
    gradient = dipole_line_gradient(unit_circle, small_mesh.centroids)
    g = np.sum(gradient * small_mesh.normals, axis=1)
    density = solve_exterior_neumann(small_mesh, g, solver=small_solver)
    flux = small_solver.represented_flux(density.values)
    projected = g - np.sum(g * small_mesh.areas) / np.sum(small_mesh.areas)
    assert np.allclose(flux, projected, atol=1e-6 * np.max(np.abs(g)))

    points = np.array([[0.0, 0.0, 0.8], [1.5, 0.2, 0.3], [0.4, 0.0, 0.3]])
    expected = dipole_line_gradient(unit_circle, points)
    actual = small_solver.field(density.values)(points).value
    error = np.linalg.norm(actual - expected, axis=1) / np.linalg.norm(expected, axis=1)
    assert np.max(error) < 0.1


@pytest.mark.slow
def test_kirchhoff_added_mass(small_mesh, small_solver) -> None:
    """Test Ma is symmetric, positive and close to the slender-body values."""
    kirchhoff = kirchhoff_system(small_mesh, small_solver)
    ma = kirchhoff.Ma
    assert np.allclose(ma, ma.T)
    assert np.min(np.linalg.eigvalsh(ma)) > -1e-8 * np.max(np.abs(ma))
    eps = small_mesh.eps
    assert ma[2, 2] == pytest.approx(2 * np.pi**2 * eps**2, rel=0.2)
    assert ma[0, 0] == pytest.approx(np.pi**2 * eps**2, rel=0.2)
    assert ma[0, 0] == pytest.approx(ma[1, 1], rel=1e-6)
    assert kirchhoff.asymmetry < 0.25


@pytest.mark.slow
def test_kirchhoff_gradient_flux(small_mesh, small_solver) -> None:
    """Test the normal part of every surface gradient reproduces the rigid-mode data."""
    kirchhoff = kirchhoff_system(small_mesh, small_solver)
    modes = rigid_modes(small_mesh.centroids)
    for i in range(6):
        data = np.sum(modes[i] * small_mesh.normals, axis=1)
        normal = np.sum(kirchhoff.surface_gradients[i] * small_mesh.normals, axis=1)
        assert np.allclose(normal, data, atol=1e-6 * max(1.0, np.max(np.abs(data))))


@pytest.mark.slow
def test_harmonic_field(unit_circle, small_mesh, small_solver) -> None:
    """Test the harmonic field is tangent to the surface with unit circulation."""
    harmonic = harmonic_field(small_mesh, unit_circle, small_solver)
    circulation = cross_section_circulation(small_mesh, harmonic.trace)
    assert np.allclose(circulation, 1.0, atol=1e-2)
    normal = harmonic.trace.normal_component(small_mesh)
    assert np.sqrt(np.mean(normal**2)) < 1e-2 * harmonic.trace.rms()


def test_reflection_of_empty_cloud(small_mesh, small_solver) -> None:
    """Test an empty cloud has no reflection."""
    reflected = reflection_field(small_mesh, VortexParticleCloud.empty(), small_solver)
    assert not np.any(reflected.trace.vectors)


def test_reflection_too_close(small_mesh, small_solver) -> None:
    """Test a particle next to the tube raises SupportTooClose."""
    cloud = VortexParticleCloud(positions=[[1.0, 0.0, 0.15]], alphas=[[1.0, 0.0, 0.0]], delta=0.05)
    with pytest.raises(SupportTooClose) as excinfo:
        reflection_field(small_mesh, cloud, small_solver)
    assert excinfo.value.separation < 2 * small_mesh.eps


@pytest.mark.slow
def test_reflection_cancels_normal_velocity(small_mesh, small_solver) -> None:
    """Test K[ω] + u_ref has no normal component on the surface."""
    cloud = VortexParticleCloud(
        positions=[[0.0, 0.0, -1.0], [0.2, 0.1, -1.2]],
        alphas=[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
        delta=0.05,
    )
    reflected = reflection_field(small_mesh, cloud, small_solver)
    free = biot_savart_particles(cloud, small_mesh.centroids).value
    total = free + reflected.trace.vectors
    normal = np.sum(total * small_mesh.normals, axis=1)
    scale = np.max(np.abs(np.sum(free * small_mesh.normals, axis=1)))
    assert np.max(np.abs(normal)) < 1e-6 * scale


@pytest.mark.slow
def test_added_mass_does_not_depend_on_frame(
    unit_circle, circle_frame, small_mesh, small_solver
) -> None:
    """Test a rotated cross-section frame gives the same Ma and 𝓑[H_2D]."""
    turned = tube_mesh(unit_circle, circle_frame.rotated(0.3), small_mesh.eps, 64, 16)
    ma = kirchhoff_system(small_mesh, small_solver).Ma
    ma_turned = kirchhoff_system(turned, NeumannSolver(turned, tol_compat=1e-4)).Ma
    assert np.max(np.abs(ma_turned - ma)) < 0.02 * np.max(np.abs(ma))
    b = calB_matrix(small_mesh, h2d_field(small_mesh))
    b_turned = calB_matrix(turned, h2d_field(turned))
    assert np.max(np.abs(b_turned - b)) < 0.05
