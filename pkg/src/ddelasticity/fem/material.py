"""
Isotropic linear elastic material and its Lamé constants.
"""
from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field


class PlaneModel(str, Enum):
    """Two-dimensional reduction of 3D elasticity."""
    PLANE_STRESS = "plane-stress"
    PLANE_STRAIN = "plane-strain"


class MaterialSpec(BaseModel):
    """Young's modulus, Poisson ratio and 2D model."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    youngs_modulus: float = Field(default=1.0, gt=0.0)
    poisson_ratio: float = Field(default=0.3, gt=-1.0, lt=0.5)
    model: PlaneModel = PlaneModel.PLANE_STRESS

    def plane_lambda(self) -> float:
        """λ̂ entering the 2D constitutive matrix."""
        mu, lam = lame_constants(self)
        if self.model is PlaneModel.PLANE_STRESS:
            return 2.0 * mu * lam / (lam + 2.0 * mu)
        return lam


def lame_constants(material: MaterialSpec) -> Tuple[float, float]:
    """
    Lamé constants ``μ = E/(2(1+ν))`` and ``λ̂ = νE/((1+ν)(1-2ν))``.

    Args:
        material: Material specification

    Returns:
        (mu, lambda_hat)
    """
    e, nu = material.youngs_modulus, material.poisson_ratio
    mu = e / (2.0 * (1.0 + nu))
    lam = nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam
