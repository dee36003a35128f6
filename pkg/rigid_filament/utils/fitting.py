"""
Least-squares fits used for convergence orders and decay slopes.
"""

from typing import Any, NamedTuple

import numpy as np


class PowerFit(NamedTuple):
    """y ≈ exp(intercept) · x**slope."""

    slope: float
    intercept: float

    def predict(self, x: Any) -> np.ndarray:
        return np.asarray(np.exp(self.intercept) * np.asarray(x, dtype=np.float64) ** self.slope)


def loglog_fit(x: Any, y: Any) -> PowerFit:
    """
    Fit a power law by linear least squares on log|x|, log|y|.

    Args:
        x: Abscissae, at least two distinct positive values
        y: Ordinates, nonzero

    Returns:
        PowerFit with the fitted slope and intercept

    Raises:
        ValueError: Fewer than two usable points
    """
    x = np.abs(np.asarray(x, dtype=np.float64))
    y = np.abs(np.asarray(y, dtype=np.float64))
    usable = (x > 0.0) & (y > 0.0) & np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(usable) < 2 or np.ptp(x[usable]) == 0.0:
        raise ValueError("A log-log fit needs at least two distinct positive points")
    slope, intercept = np.polyfit(np.log(x[usable]), np.log(y[usable]), 1)
    return PowerFit(slope=float(slope), intercept=float(intercept))


def observed_order(h: Any, error: Any) -> float:
    """Convergence order of error in h, positive when the error shrinks with h."""
    return loglog_fit(h, error).slope


def strictly_decreasing(values: Any) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(np.diff(values) < 0.0))


def strictly_increasing(values: Any) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(np.diff(values) > 0.0))
