"""
Tests for the matrix cache, log-log fits and the configuration reference generator.
"""

import numpy as np
import pytest

from rigid_filament.models.config import QuadratureSpec
from rigid_filament.numerics.geometry import tube_mesh
from rigid_filament.numerics.neumann import NeumannSolver
from rigid_filament.utils.fitting import (
    loglog_fit,
    observed_order,
    strictly_decreasing,
    strictly_increasing,
)
from rigid_filament.utils.generate_reference import generate_reference, render_section
from rigid_filament.utils.matrix_cache import MatrixCache


@pytest.fixture
def coarse_mesh(unit_circle, circle_frame):
    """Return a 32 x 8 tube mesh of radius 0.1."""
    return tube_mesh(unit_circle, circle_frame, 0.1, 32, 8)


def test_cache_round_trip(tmp_path) -> None:
    """Test matrices read back with shape and values."""
    cache = MatrixCache(tmp_path / "cache")
    matrices = [np.arange(6.0).reshape(2, 3), np.eye(4)]
    path = cache.save("key", matrices)
    assert path.exists()
    loaded = cache.load("key")
    assert loaded is not None
    assert len(loaded) == 2
    assert np.array_equal(loaded[0], matrices[0])
    assert np.array_equal(loaded[1], matrices[1])


def test_cache_ignores_bad_files(tmp_path) -> None:
    """Test missing, foreign and truncated entries load as None."""
    cache = MatrixCache(tmp_path)
    assert cache.load("absent") is None
    cache.path_for("foreign").write_bytes(b"JUNKJUNKJUNK")
    assert cache.load("foreign") is None
    cache.save("short", [np.eye(3)])
    data = cache.path_for("short").read_bytes()
    cache.path_for("short").write_bytes(data[:-16])
    assert cache.load("short") is None


def test_cache_clear(tmp_path) -> None:
    """Test clear removes every entry."""
    cache = MatrixCache(tmp_path)
    cache.save("a", [np.eye(2)])
    cache.save("b", [np.eye(2)])
    assert len(cache.entries()) == 2
    assert cache.clear() == 2
    assert cache.entries() == []


def test_cache_key_depends_on_mesh(unit_circle, circle_frame, coarse_mesh, tmp_path) -> None:
    """Test keys are stable and change with the radius and the quadrature."""
    cache = MatrixCache(tmp_path)
    quadrature = QuadratureSpec()
    key = cache.key_for(coarse_mesh, quadrature)
    assert key == cache.key_for(coarse_mesh, QuadratureSpec())
    other = tube_mesh(unit_circle, circle_frame, 0.05, 32, 8)
    assert key != cache.key_for(other, quadrature)
    assert key != cache.key_for(coarse_mesh, QuadratureSpec(far_ratio=4.0))


def test_solver_reuses_cached_matrices(coarse_mesh, tmp_path) -> None:
    """Test a second solver on the same mesh loads the assembled matrices."""
    cache = MatrixCache(tmp_path)
    first = NeumannSolver(coarse_mesh, cache=cache)
    assert len(cache.entries()) == 1
    second = NeumannSolver(coarse_mesh, cache=cache)
    assert np.array_equal(first.system_matrix, second.system_matrix)
    assert np.array_equal(first.single_layer_matrix, second.single_layer_matrix)


def test_loglog_fit() -> None:
    """Test a power law is recovered exactly."""
    x = np.array([0.2, 0.1, 0.05])
    fit = loglog_fit(x, 3.0 * x**2)
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(np.log(3.0))
    assert np.allclose(fit.predict([0.4]), [0.48])
    assert observed_order(x, 5.0 * x) == pytest.approx(1.0)


def test_loglog_fit_needs_two_points() -> None:
    """Test zero values are dropped and one usable point is not enough."""
    with pytest.raises(ValueError):
        loglog_fit([0.2, 0.1], [1.0, 0.0])
    with pytest.raises(ValueError):
        loglog_fit([0.1, 0.1], [1.0, 2.0])


def test_monotonicity_helpers() -> None:
    """Test strict monotonicity treats ties as failures."""
    assert strictly_decreasing([3.0, 2.0, 1.0])
    assert not strictly_decreasing([3.0, 3.0, 1.0])
    assert strictly_increasing([0.0, 1e-9])
    assert not strictly_increasing([1.0, 0.5])


def test_render_section() -> None:
    """Test a model renders as a markdown table with defaults."""
    text = render_section("mesh.quadrature", QuadratureSpec)
    assert text.startswith("## mesh.quadrature")
    assert "| `far_ratio` | `float` | `3.0` |" in text


def test_generate_reference(tmp_path) -> None:
    """Test the full reference covers every section and is written to disk."""
    output = tmp_path / "docs" / "configuration-reference.md"
    text = generate_reference(output)
    assert output.read_text(encoding="utf-8") == text
    for heading in ["## Top level", "## curve", "## inertia", "## vorticity", "## output"]:
        assert heading in text
    assert "| `scenario` | `str` | required |" in text
    assert "| `mesh` | `MeshSpec` | see section |" in text
