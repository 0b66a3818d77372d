"""
Pydantic schemas for network-generator parameters.

Invariant violations raise ``ParameterValidationError`` directly from the model
validators, so callers see the toolkit's own error type rather than a generic
pydantic ``ValidationError``. Type mismatches (a string where a float belongs)
still surface as ``ValidationError``.
"""

from typing import Any

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.exceptions import ParameterValidationError

RHO_TOLERANCE = 1e-12


class GmzzDescriptor(BaseModel):
    """Regularity restrictions under which exact block recovery has an exponential rate."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    a_over_n: float = Field(description="Within-block density floor")
    b_over_n: float = Field(description="Between-block density ceiling")
    alpha_density: float = Field(default=1.0, description="Spread allowed on the diagonal")
    beta_balance: float = Field(default=1.0, description="Community-size balance constant")
    lambda_sv: float = Field(default=0.0, description="Floor on the k-th singular value of W")

    @model_validator(mode="after")
    def check_ranges(self) -> "GmzzDescriptor":
        if not 0.0 < self.b_over_n < self.a_over_n < 1.0:
            raise ParameterValidationError(
                f"GMZZ requires 0 < b/n < a/n < 1, got b/n={self.b_over_n}, a/n={self.a_over_n}"
            )
        if self.alpha_density < 1.0 or self.beta_balance < 1.0:
            raise ParameterValidationError("GMZZ alpha_density and beta_balance must be >= 1")
        if self.lambda_sv < 0.0:
            raise ParameterValidationError("GMZZ lambda_sv must be nonnegative")
        return self


class SbmParams(BaseModel):
    """Stochastic block model: block count, membership distribution and affinity matrix."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    k: int = Field(description="Number of blocks")
    rho: list[float] = Field(description="Block-membership distribution")
    W: list[list[float]] = Field(description="k x k affinity matrix")
    directed: bool = False
    gmzz: GmzzDescriptor | None = None

    @property
    def rho_array(self) -> np.ndarray:
        return np.asarray(self.rho, dtype=float)

    @property
    def w_array(self) -> np.ndarray:
        return np.asarray(self.W, dtype=float)

    @model_validator(mode="after")
    def check_invariants(self) -> "SbmParams":
        if self.k < 1:
            raise ParameterValidationError(f"k must be >= 1, got {self.k}")
        rho = self.rho_array
        if rho.shape != (self.k,):
            raise ParameterValidationError(f"rho must have length k={self.k}, got {rho.shape[0]}")
        if np.any(rho < 0) or abs(rho.sum() - 1.0) > RHO_TOLERANCE:
            raise ParameterValidationError(f"rho must be a probability vector, got {self.rho}")
        w = self.w_array
        if w.shape != (self.k, self.k):
            raise ParameterValidationError(f"W must be {self.k}x{self.k}, got {w.shape}")
        if np.any(w < 0.0) or np.any(w > 1.0) or not np.all(np.isfinite(w)):
            raise ParameterValidationError("W entries must lie in [0, 1]")
        if not self.directed and not np.array_equal(w, w.T):
            raise ParameterValidationError("W must be symmetric for an undirected network")
        if self.gmzz is not None:
            self._check_gmzz_hard()
        return self

    def _strict_form_holds(self) -> bool:
        g = self.gmzz
        assert g is not None
        w = self.w_array
        off = w[~np.eye(self.k, dtype=bool)]
        return bool(w.diagonal().min() >= g.a_over_n and (off.size == 0 or off.max() <= g.b_over_n))

    def _average_form_holds(self) -> bool:
        g = self.gmzz
        assert g is not None
        w = self.w_array
        off = w[~np.eye(self.k, dtype=bool)]
        sparse_between = off.size == 0 or off.mean() <= g.b_over_n
        return bool(w.diagonal().mean() >= g.a_over_n and sparse_between)

    def _check_gmzz_hard(self) -> None:
        g = self.gmzz
        assert g is not None
        if self.k < 2:
            raise ParameterValidationError("GMZZ conditions need at least two blocks")
        sv = np.linalg.svd(self.w_array, compute_uv=False)
        if sv[self.k - 1] < g.lambda_sv:
            raise ParameterValidationError(
                f"k-th singular value of W is {sv[self.k - 1]:.6g} < lambda_sv={g.lambda_sv}"
            )
        if not self._strict_form_holds() and not self._average_form_holds():
            raise ParameterValidationError(
                "W violates both the max/min and the averaged GMZZ density inequalities"
            )

    def gmzz_warnings(self) -> list[str]:
        """Soft GMZZ findings: conditions that fail only in their stricter form."""
        if self.gmzz is None:
            return []
        g = self.gmzz
        w = self.w_array
        found: list[str] = []
        if not self._strict_form_holds():
            found.append(
                "W satisfies only the averaged density inequalities; "
                "min diagonal >= a/n or max off-diagonal <= b/n fails"
            )
        if w.diagonal().max() > g.alpha_density * g.a_over_n:
            found.append(
                f"max diagonal {w.diagonal().max():.4g} exceeds alpha*a/n="
                f"{g.alpha_density * g.a_over_n:.4g}"
            )
        rho = self.rho_array
        lo, hi = 1.0 / (g.beta_balance * self.k), g.beta_balance / self.k
        if rho.min() < lo or rho.max() > hi:
            found.append(f"rho outside the balance band [{lo:.4g}, {hi:.4g}]")
        for message in found:
            logger.warning(f"GMZZ: {message}")
        return found


class CoordinateDistribution(BaseModel):
    """Per-coordinate independent distribution F of the latent positions.

    ``family`` is checked when sampling, where an unknown name is a
    ``ConfigurationError``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: str = "normal"
    params: dict[str, float] = Field(default_factory=dict)


class LspParams(BaseModel):
    """Continuous latent space model with a known logistic-of-distance link."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int = Field(description="Latent dimension")
    dist: CoordinateDistribution = Field(default_factory=CoordinateDistribution)
    link_intercept: float = Field(description="theta_0")
    link_scale: float = Field(default=1.0, description="s > 0")
    directed: bool = False

    @model_validator(mode="after")
    def check_invariants(self) -> "LspParams":
        if self.d < 1:
            raise ParameterValidationError(f"latent dimension must be >= 1, got {self.d}")
        if not self.link_scale > 0.0 or not np.isfinite(self.link_scale):
            raise ParameterValidationError(f"link_scale must be positive, got {self.link_scale}")
        if not np.isfinite(self.link_intercept):
            raise ParameterValidationError("link_intercept must be finite")
        return self


def as_params(model: type[BaseModel], data: Any) -> Any:
    """Validate raw data into ``model``, reporting failures as ``ParameterValidationError``."""
    if isinstance(data, model):
        return data
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ParameterValidationError(str(exc)) from exc
