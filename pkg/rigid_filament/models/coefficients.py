"""
Inertia and coefficient models of the reduced Newton equations.
"""

from typing import Any, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .base import ArrayModel, as_float_array


class InertiaSpec(BaseModel):
    """Mass and rotational inertia of the filament, with optional density scaling in eps."""

    m: float = Field(1.0, description="Mass of the body")
    J0: List[List[float]] = Field(
        default_factory=lambda: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]],
        description="Rotational inertia about the centre of mass (3x3 SPD)",
    )
    scaling_mode: Literal["massive", "density"] = Field(
        "massive", description="'density' scales m and J0 by eps^2"
    )

    @field_validator("m")
    @classmethod
    def validate_mass(cls, v: float) -> float:
        """Mass is positive."""
        if v <= 0.0:
            raise ValueError("Mass must be positive")
        return v

    @field_validator("J0")
    @classmethod
    def validate_j0(cls, v: List[List[float]]) -> List[List[float]]:
        """J0 is symmetric positive definite."""
        j0 = np.asarray(v, dtype=np.float64)
        if j0.shape != (3, 3):
            raise ValueError("J0 must be a 3x3 matrix")
        if np.max(np.abs(j0 - j0.T)) > 1e-12 * max(1.0, float(np.max(np.abs(j0)))):
            raise ValueError("J0 must be symmetric")
        if np.min(np.linalg.eigvalsh(j0)) <= 0.0:
            raise ValueError("J0 must be positive definite")
        return v

    @property
    def j0(self) -> np.ndarray:
        return np.asarray(self.J0, dtype=np.float64)

    def effective(self, eps: Optional[float] = None) -> Tuple[float, np.ndarray]:
        """Mass and inertia after the density scaling, if any."""
        if self.scaling_mode == "density":
            if eps is None:
                raise ValueError("Density scaling needs a tube radius")
            return eps**2 * self.m, eps**2 * self.j0
        return self.m, self.j0

    def mass_matrix(self, eps: Optional[float] = None) -> np.ndarray:
        """Block-diagonal Mg = diag(m I3, J0)."""
        m, j0 = self.effective(eps)
        mg = np.zeros((6, 6))
        mg[:3, :3] = m * np.eye(3)
        mg[3:, 3:] = j0
        return mg


class KirchhoffSet(ArrayModel):
    """Kirchhoff potentials of the six rigid modes and the added mass they induce."""

    densities: np.ndarray
    potentials: np.ndarray
    surface_gradients: np.ndarray
    Ma: np.ndarray
    asymmetry: float = 0.0

    @field_validator("densities", "potentials", mode="before")
    @classmethod
    def validate_scalars(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "Kirchhoff scalars", (6, None))

    @field_validator("surface_gradients", mode="before")
    @classmethod
    def validate_gradients(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "surface_gradients", (6, None, 3))

    @field_validator("Ma", mode="before")
    @classmethod
    def validate_ma(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "Ma", (6, 6))


def _is_skew(matrix: np.ndarray, rel_tol: float) -> bool:
    scale = max(float(np.max(np.abs(matrix))), 1e-300)
    return bool(np.max(np.abs(matrix + matrix.T)) <= rel_tol * scale)


class CoefficientSet(ArrayModel):
    """Mg, Ma, the circulation matrix B and the Γ_a tensor for one body and regime."""

    Mg: np.ndarray
    Ma: np.ndarray
    B: np.ndarray
    gamma_a_tensor: np.ndarray
    inertia: InertiaSpec
    eps: Optional[float] = None

    @field_validator("Mg", "Ma", "B", mode="before")
    @classmethod
    def validate_matrix(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "coefficient matrix", (6, 6))

    @field_validator("gamma_a_tensor", mode="before")
    @classmethod
    def validate_tensor(cls, v: Any) -> np.ndarray:
        return as_float_array(v, "gamma_a_tensor", (6, 6, 6))

    @model_validator(mode="after")
    def validate_structure(self) -> "CoefficientSet":
        """Mg + Ma is SPD, B and every 𝓑[∇Φ_i] are skew."""
        total = self.Mg + self.Ma
        if np.max(np.abs(total - total.T)) > 1e-8 * float(np.max(np.abs(total))):
            raise ValueError("Mg + Ma must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (total + total.T))) <= 0.0:
            raise ValueError("Mg + Ma must be positive definite")
        if not _is_skew(self.B, 1e-10):
            raise ValueError("B must be skew-symmetric")
        for i in range(6):
            if not _is_skew(self.gamma_a_tensor[i], 1e-10):
                raise ValueError(f"gamma_a_tensor[{i}] must be skew-symmetric")
        return self

    @property
    def total_mass(self) -> np.ndarray:
        return self.Mg + self.Ma
