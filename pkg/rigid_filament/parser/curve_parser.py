"""
Parser for curve point tables and built-in curve settings.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import DegenerateCurve
from ..models.config import CurveSpec
from ..models.geometry import Curve
from ..numerics.geometry import builtin_points, circle_curve, resample_arclength

logger = logging.getLogger(__name__)


def parse_curve_table(file_path: Union[str, Path]) -> np.ndarray:
    """
    Read a plain-text table of x y z rows.

    Columns may be separated by commas or whitespace; ``#`` starts a comment.

    Args:
        file_path: Path to the table

    Returns:
        (M, 3) array of points

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If a row does not hold three numbers
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Curve table not found: {file_path}")

    rows = []
    for number, raw in enumerate(file_path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"{file_path}:{number}: expected 3 columns, got {len(fields)}")
        try:
            rows.append([float(value) for value in fields])
        except ValueError as e:
            raise ValueError(f"{file_path}:{number}: {e}")
    if not rows:
        raise DegenerateCurve(f"Curve table {file_path} has no points")
    return np.asarray(rows, dtype=np.float64)


def build_curve(spec: CurveSpec, base_dir: Optional[Union[str, Path]] = None) -> Curve:
    """
    Build the arc-length sampled centreline described by a CurveSpec, recentred at its centroid.

    Args:
        spec: Curve specification
        base_dir: Directory that relative table paths are resolved against

    Returns:
        Recentred Curve; ``center_shift`` records the removed centroid
    """
    if spec.kind == "circle":
        curve = circle_curve(spec.radius, spec.n_samples, spec.center, spec.orientation)
    elif spec.kind == "table":
        assert spec.path is not None
        path = Path(spec.path)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        curve = resample_arclength(parse_curve_table(path), spec.n_samples)
    else:
        params = {
            "ellipse": {"a": spec.semi_axes[0], "b": spec.semi_axes[1]},
            "trefoil": {"scale": spec.scale},
            "torus_knot": {
                "p": float(spec.p),
                "q": float(spec.q),
                "R": spec.major_radius,
                "r": spec.minor_radius,
            },
        }[spec.kind]
        points = builtin_points(spec.kind, spec.vertices, **params)
        curve = resample_arclength(points, spec.n_samples)

    recentered = curve.recentered()
    logger.info(
        f"Curve '{spec.kind}': length {recentered.length:.6g}, "
        f"{recentered.n_samples} samples, shift {np.round(recentered.center_shift, 12)}"
    )
    return recentered
