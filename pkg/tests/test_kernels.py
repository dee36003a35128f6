"""
Tests for the Biot-Savart evaluators, H_2D and the swirl cloud.
"""

import numpy as np
import pytest

from rigid_filament.errors import InvalidRadius, NotOnSurface, SingularEvaluation
from rigid_filament.models.fields import VortexParticleCloud
from rigid_filament.numerics.kernels import (
    CurveField,
    ScaledField,
    SumField,
    biot_savart_curve,
    biot_savart_particles,
    filament_cloud,
    h2d,
    h2d_field,
    ring_axis_oracle,
    ring_far_field_radial,
    ring_field_exact,
    ring_vortex_cloud,
)
from rigid_filament.numerics.neumann import cross_section_circulation
from rigid_filament.utils.fitting import loglog_fit


@pytest.mark.parametrize("z", [0.0, 0.5, 2.0])
def test_ring_axis_field(unit_circle, z: float) -> None:
    """Test the filament field on the axis matches R²/(2(R²+z²)^{3/2}) e3."""
    value = biot_savart_curve(unit_circle, 1.0, [0.0, 0.0, z])
    assert np.allclose(value, ring_axis_oracle(1.0, z), rtol=1e-10, atol=1e-14)


def test_ring_field_off_axis(unit_circle) -> None:
    """Test the filament field off the axis against the elliptic-integral formula."""
    points = np.array([[0.5, 0.3, 0.4], [2.0, 0.0, 1.0], [0.0, 1.4, -0.3]])
    sample = biot_savart_curve(unit_circle, 1.0, points, oversampling=4)
    assert np.allclose(sample.value, ring_field_exact(1.0, points), rtol=1e-6, atol=1e-10)


def test_filament_gradient_matches_finite_differences(unit_circle) -> None:
    """Test the analytic Jacobian and that the field is divergence and curl free."""
    x = np.array([0.3, -0.4, 0.5])
    sample = biot_savart_curve(unit_circle, 1.0, x[None, :], want_gradient=True)
    h = 1e-5
    numeric = np.stack(
        [
            (
                biot_savart_curve(unit_circle, 1.0, x + h * e)
                - biot_savart_curve(unit_circle, 1.0, x - h * e)
            )
            / (2 * h)
            for e in np.eye(3)
        ],
        axis=1,
    )
    assert np.allclose(sample.gradient[0], numeric, atol=1e-7)
    assert abs(sample.divergence()[0]) < 1e-10
    assert np.allclose(sample.curl()[0], 0.0, atol=1e-10)


def test_filament_singular_on_curve(unit_circle) -> None:
    """Test evaluation on the filament is rejected."""
    with pytest.raises(SingularEvaluation):
        biot_savart_curve(unit_circle, 1.0, unit_circle.samples[3])


def test_single_particle_field() -> None:
    """Test the Rosenhead-Moore kernel of one particle."""
    cloud = VortexParticleCloud(positions=[[0.0, 0.0, 0.0]], alphas=[[0.0, 0.0, 1.0]], delta=0.5)
    value = biot_savart_particles(cloud, [[1.0, 0.0, 0.0]]).value[0]
    expected = np.array([0.0, 1.0, 0.0]) / (4 * np.pi * 1.25**1.5)
    assert np.allclose(value, expected)


def test_filament_cloud_matches_filament(unit_circle) -> None:
    """Test a fine particle copy of the ring reproduces its far field."""
    cloud = filament_cloud(unit_circle, 1.0, 512, 1e-3)
    points = np.array([[0.0, 0.0, 2.0], [3.0, 0.0, 0.5]])
    expected = biot_savart_curve(unit_circle, 1.0, points).value
    actual = biot_savart_particles(cloud, points).value
    assert np.allclose(actual, expected, rtol=1e-4, atol=1e-8)


def test_sum_and_scaled_fields(unit_circle) -> None:
    """Test field combinators add and scale values."""
    points = np.array([[0.0, 0.0, 1.0]])
    single = CurveField(unit_circle)(points).value
    assert np.allclose(ScaledField(CurveField(unit_circle), 2.0)(points).value, 2 * single)
    total = SumField(CurveField(unit_circle), None, CurveField(unit_circle))
    assert np.allclose(total(points).value, 2 * single)


def test_h2d_on_panel_centroids(small_mesh) -> None:
    """Test H_2D is e_θ/(2π eps) and has unit circulation on every cross-section."""
    value = h2d(small_mesh.centroids[7], small_mesh)
    assert np.linalg.norm(value) == pytest.approx(1.0 / (2 * np.pi * small_mesh.eps))
    assert np.allclose(cross_section_circulation(small_mesh, h2d_field(small_mesh)), 1.0)


def test_h2d_off_surface(small_mesh) -> None:
    """Test H_2D rejects points that are not panel centroids."""
    with pytest.raises(NotOnSurface):
        h2d([0.0, 0.0, 5.0], small_mesh)


def test_ring_axis_oracle_radius() -> None:
    """Test a non-positive ring radius is rejected."""
    with pytest.raises(InvalidRadius):
        ring_axis_oracle(0.0, 1.0)


def test_ring_far_field_radial() -> None:
    """Test the far-field radial law of the clockwise ring against the exact field."""
    r, x3 = 0.5, -20.0
    exact = ring_field_exact(1.0, [r, 0.0, x3], orientation="clockwise")
    assert exact[0] == pytest.approx(ring_far_field_radial(r, x3), rel=0.05)
    assert ring_far_field_radial(r, x3) > 0.0


def test_ring_vortex_cloud() -> None:
    """Test the swirl cloud is centred below the origin and carries no net vorticity."""
    swirl = ring_vortex_cloud(10.0, strength=1.0, core=1.0, n_particles=512)
    cloud = swirl.cloud
    assert cloud.n_particles > 0
    assert swirl.moment > 0.0
    centre = np.array([0.0, 0.0, -10.0])
    assert np.max(np.linalg.norm(cloud.positions - centre, axis=1)) < 1.0
    scale = np.sum(np.linalg.norm(cloud.alphas, axis=1))
    assert np.linalg.norm(cloud.total_vorticity()) < 1e-12 * scale
    assert np.allclose(cloud.alphas[:, 2], 0.0)


def test_ring_vortex_cloud_rejects_strength() -> None:
    """Test swirl strength above one is rejected."""
    with pytest.raises(ValueError):
        ring_vortex_cloud(10.0, strength=1.5)


def test_far_field_decay_slope(unit_circle) -> None:
    """Test the ring field decays like |x|^-3 away from the body."""
    direction = np.array([0.6, 0.0, 0.8])
    radii = np.array([25.0, 50.0, 100.0])
    values = biot_savart_curve(unit_circle, 1.0, radii[:, None] * direction).value
    slope = loglog_fit(radii, np.linalg.norm(values, axis=1)).slope
    assert -3.1 <= slope <= -2.9


def test_filament_circulation_around_loop(unit_circle, circle_frame) -> None:
    """Test the filament field circulates Γ around a small loop linking the curve."""
    circulation = 2.5
    t0 = 0.7
    centre, _, _ = unit_circle.evaluate(t0)
    s1, s2, _ = circle_frame.evaluate(unit_circle, t0)
    phi = 2 * np.pi * np.arange(256) / 256
    rho = 0.1
    loop = centre + rho * (np.cos(phi)[:, None] * s1 + np.sin(phi)[:, None] * s2)
    along = rho * (-np.sin(phi)[:, None] * s1 + np.cos(phi)[:, None] * s2)
    value = biot_savart_curve(unit_circle, circulation, loop, oversampling=4).value
    total = np.sum(value * along) * (2 * np.pi / 256)
    assert total == pytest.approx(circulation, rel=1e-6)


def random_cloud(n: int = 20, delta: float = 0.2) -> VortexParticleCloud:
    """Return a seeded cloud of n particles inside the unit cube."""
    rng = np.random.default_rng(1)
    return VortexParticleCloud(
        positions=rng.uniform(-1.0, 1.0, (n, 3)), alphas=rng.normal(size=(n, 3)), delta=delta
    )


def test_particle_gradient_matches_finite_differences() -> None:
    """Test the analytic Jacobian of the particle field and its zero divergence."""
    cloud = random_cloud()
    x = np.array([0.2, 0.1, -0.3])
    sample = biot_savart_particles(cloud, x[None, :], want_gradient=True)
    h = 1e-5
    numeric = np.stack(
        [
            (
                biot_savart_particles(cloud, (x + h * e)[None, :]).value[0]
                - biot_savart_particles(cloud, (x - h * e)[None, :]).value[0]
            )
            / (2 * h)
            for e in np.eye(3)
        ],
        axis=1,
    )
    assert np.allclose(sample.gradient[0], numeric, atol=1e-6)
    assert abs(np.trace(sample.gradient[0])) < 1e-10


def test_particle_kernel_is_antisymmetric() -> None:
    """Test swapping source and target reverses the induced velocity."""
    alpha = [[0.3, -1.0, 0.5]]
    x, y = np.array([0.4, 0.2, -0.1]), np.array([-0.5, 0.7, 0.3])
    at_x = biot_savart_particles(
        VortexParticleCloud(positions=[y], alphas=alpha, delta=0.1), x[None, :]
    ).value[0]
    at_y = biot_savart_particles(
        VortexParticleCloud(positions=[x], alphas=alpha, delta=0.1), y[None, :]
    ).value[0]
    assert np.allclose(at_x, -at_y, rtol=1e-14, atol=0.0)


def test_particle_kernel_far_from_core() -> None:
    """Test the regularized kernel matches the singular one at 100 core radii."""
    delta = 0.01
    alpha = np.array([0.0, 0.0, 1.0])
    cloud = VortexParticleCloud(positions=[[0.0, 0.0, 0.0]], alphas=[alpha], delta=delta)
    x = np.array([0.6, 0.8, 0.0]) * 100 * delta
    singular = np.cross(alpha, x) / (4 * np.pi * np.linalg.norm(x) ** 3)
    value = biot_savart_particles(cloud, x[None, :]).value[0]
    assert np.linalg.norm(value - singular) <= 1e-3 * np.linalg.norm(singular)


def test_particle_ring_matches_filament_on_axis(unit_circle) -> None:
    """Test a 256-particle copy of the unit ring against the filament field at z = 1."""
    cloud = filament_cloud(unit_circle, 1.0, 256, 0.05)
    point = np.array([[0.0, 0.0, 1.0]])
    expected = biot_savart_curve(unit_circle, 1.0, point).value[0]
    actual = biot_savart_particles(cloud, point).value[0]
    assert np.linalg.norm(actual - expected) <= 0.05 * np.linalg.norm(expected)
