"""
Tests for curve tables and built-in curve settings.
"""

import numpy as np
import pytest

from rigid_filament.errors import DegenerateCurve
from rigid_filament.models.config import CurveSpec
from rigid_filament.parser.curve_parser import build_curve, parse_curve_table


def test_parse_curve_table(test_data_dir) -> None:
    """Test comments, commas and whitespace are all accepted."""
    points = parse_curve_table(test_data_dir / "square_loop.txt")
    assert points.shape == (16, 3)
    assert np.allclose(points[12], [0.0, -1.0, 0.0])


def test_parse_curve_table_missing(tmp_path) -> None:
    """Test a missing table raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        parse_curve_table(tmp_path / "missing.txt")


def test_parse_curve_table_wrong_columns(tmp_path) -> None:
    """Test rows with two columns are rejected with their line number."""
    path = tmp_path / "flat.txt"
    path.write_text("0 0 0\n1 0\n")
    with pytest.raises(ValueError, match=":2:"):
        parse_curve_table(path)


def test_parse_curve_table_empty(tmp_path) -> None:
    """Test a table holding only comments is degenerate."""
    path = tmp_path / "empty.txt"
    path.write_text("# nothing here\n\n")
    with pytest.raises(DegenerateCurve):
        parse_curve_table(path)


def test_build_circle() -> None:
    """Test a circle CurveSpec gives a recentred circle of the right length."""
    curve = build_curve(CurveSpec(kind="circle", radius=2.0, center=[1.0, 0.0, 0.5], n_samples=64))
    assert curve.length == pytest.approx(4 * np.pi)
    assert np.allclose(curve.center_shift, [1.0, 0.0, 0.5])
    assert np.allclose(np.mean(curve.samples, axis=0), 0.0, atol=1e-12)


def test_build_ellipse() -> None:
    """Test an ellipse CurveSpec is resampled to the requested sample count."""
    curve = build_curve(CurveSpec(kind="ellipse", semi_axes=[1.0, 0.5], n_samples=128))
    assert curve.n_samples == 128
    assert np.max(np.abs(curve.samples[:, 0])) == pytest.approx(1.0, abs=5e-3)


def test_build_table_relative_path(test_data_dir) -> None:
    """Test relative table paths are resolved against the base directory."""
    spec = CurveSpec(kind="table", path="square_loop.txt", n_samples=64)
    curve = build_curve(spec, base_dir=test_data_dir)
    assert curve.n_samples == 64
    assert 2 * np.pi * 0.9 < curve.length < 8.0


def test_table_spec_needs_path() -> None:
    """Test kind 'table' without a path is rejected."""
    with pytest.raises(ValueError):
        CurveSpec(kind="table")
