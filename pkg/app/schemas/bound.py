"""
Schemas for the finite-sample bias bound.
"""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import ParameterValidationError

# Indicator covariances cannot exceed this in magnitude
MAX_INDICATOR_COVARIANCE = 0.25

Decomposition = Literal["corrected", "published"]


class BoundInput(BaseModel):
    """Inputs of the bilinear maximization over the product of simplices."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    delta: float = Field(description="Exact-recovery failure probability")
    gamma1: list[float] = Field(description="True loading or its proxy gamma0-hat")
    c_hat_i: list[float] = Field(description="Observed dummy vector of node i")
    c_hat_j: list[float] = Field(description="Observed dummy vector of node j")
    cov_g0_cap: float = Field(default=MAX_INDICATOR_COVARIANCE)
    decomposition: Decomposition = "corrected"
    in_degree: int | None = Field(default=None, description="Aggregate over this many linked dyads")
    gamma_source: Literal["true", "estimated"] = "true"

    @model_validator(mode="after")
    def check_invariants(self) -> "BoundInput":
        if not 0.0 <= self.delta <= 1.0:
            raise ParameterValidationError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 <= self.cov_g0_cap <= MAX_INDICATOR_COVARIANCE:
            raise ParameterValidationError(
                f"cov_g0_cap must lie in [0, {MAX_INDICATOR_COVARIANCE}], got {self.cov_g0_cap}"
            )
        width = len(self.gamma1)
        if width < 1 or len(self.c_hat_i) != width or len(self.c_hat_j) != width:
            raise ParameterValidationError("gamma1, c_hat_i and c_hat_j must share one length >= 1")
        for name, vec in (("c_hat_i", self.c_hat_i), ("c_hat_j", self.c_hat_j)):
            arr = np.asarray(vec, dtype=float)
            if not np.all(np.isin(arr, (0.0, 1.0))) or arr.sum() > 1.0:
                raise ParameterValidationError(f"{name} must be a dummy vector (a simplex vertex)")
        if not np.all(np.isfinite(self.gamma1)):
            raise ParameterValidationError("gamma1 must be finite")
        if self.in_degree is not None and self.in_degree < 0:
            raise ParameterValidationError("in_degree must be nonnegative")
        return self
