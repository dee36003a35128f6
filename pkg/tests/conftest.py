"""
Shared fixtures: unit circle, its frame and a small tube mesh with an assembled solver.
"""

from pathlib import Path

import pytest

from rigid_filament.models.geometry import Curve, Frame, TubeMesh
from rigid_filament.numerics.geometry import build_frame, circle_curve, tube_mesh
from rigid_filament.numerics.neumann import NeumannSolver


@pytest.fixture
def test_data_dir() -> Path:
    """Return the path to the test data directory."""
    return Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def unit_circle() -> Curve:
    """Counterclockwise unit circle in the xy-plane, 256 samples."""
    return circle_curve(1.0, 256)


@pytest.fixture(scope="session")
def circle_frame(unit_circle: Curve) -> Frame:
    return build_frame(unit_circle)


@pytest.fixture(scope="session")
def small_mesh(unit_circle: Curve, circle_frame: Frame) -> TubeMesh:
    """Tube of radius 0.1 around the unit circle, 64 x 16 panels."""
    return tube_mesh(unit_circle, circle_frame, 0.1, 64, 16)


@pytest.fixture(scope="session")
def small_solver(small_mesh: TubeMesh) -> NeumannSolver:
    return NeumannSolver(small_mesh, tol_compat=1e-4)
