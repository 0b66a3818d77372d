"""
Schemas for the structural behavior equation.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import ParameterValidationError


class StructuralCoeffs(BaseModel):
    """Coefficients of the linear structural equation driving Y(i, t)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha0: float = Field(default=0.0, description="Intercept")
    alpha1: float = Field(default=0.0, description="Autoregressive coefficient")
    beta_influence: float = Field(default=0.0, description="Peer-influence coefficient")
    gamma1: list[float] = Field(description="Loading on the latent location C_i")
    gamma2: list[float] = Field(default=[1.0], description="Loading on the covariates X_i")
    gamma1_quadratic: list[float] = Field(
        default=[], description="Coordinate-wise loading on C_i**2 (empty means linear)"
    )
    sigma_eps: float = Field(default=1.0, description="Noise standard deviation")

    @model_validator(mode="after")
    def check_invariants(self) -> "StructuralCoeffs":
        scalars = [self.alpha0, self.alpha1, self.beta_influence, self.sigma_eps]
        vectors = self.gamma1 + self.gamma2 + self.gamma1_quadratic
        if not np.all(np.isfinite(scalars + vectors)):
            raise ParameterValidationError("structural coefficients must be finite")
        if self.sigma_eps < 0.0:
            raise ParameterValidationError(f"sigma_eps must be >= 0, got {self.sigma_eps}")
        if self.gamma1_quadratic and len(self.gamma1_quadratic) != len(self.gamma1):
            raise ParameterValidationError("gamma1_quadratic must match the length of gamma1")
        return self

    @property
    def gamma1_array(self) -> np.ndarray:
        return np.asarray(self.gamma1, dtype=float)

    @property
    def gamma2_array(self) -> np.ndarray:
        return np.asarray(self.gamma2, dtype=float)

    def nodal_effect(self, locations: np.ndarray) -> np.ndarray:
        """gamma1(C_i): linear, plus the quadratic term when one is configured."""
        effect = locations @ self.gamma1_array
        if self.gamma1_quadratic:
            effect = effect + (locations**2) @ np.asarray(self.gamma1_quadratic, dtype=float)
        return effect
