"""
Shared helpers for array-carrying models.
"""

from typing import Any, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict


class ArrayModel(BaseModel):
    """Immutable model whose fields may be numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def as_float_array(
    value: Any, name: str, shape: Optional[Sequence[Optional[int]]] = None
) -> np.ndarray:
    """
    Convert a value to a read-only float64 array and check its shape.

    Args:
        value: Array-like input
        name: Field name used in error messages
        shape: Expected shape, ``None`` entries match any size

    Returns:
        Read-only float64 array

    Raises:
        ValueError: If the shape does not match or entries are not finite
    """
    array = np.array(value, dtype=np.float64)
    if shape is not None:
        if array.ndim != len(shape) or any(
            expected is not None and actual != expected
            for actual, expected in zip(array.shape, shape)
        ):
            raise ValueError(f"{name} must have shape {tuple(shape)}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    array.setflags(write=False)
    return array


def as_vector3(value: Any, name: str) -> np.ndarray:
    """Convert a value to a read-only 3-vector."""
    return as_float_array(value, name, (3,))


def cross_matrix(v: np.ndarray) -> np.ndarray:
    """Matrix of the map x -> v ∧ x."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def split_p(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split a body velocity p = (ℓ, Ω) into its translational and angular parts."""
    return p[:3], p[3:]
