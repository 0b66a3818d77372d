"""
Option schemas for the recovery procedures and regression controls.
"""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class Strategy(str, Enum):
    """How the effective model controls for latent location."""

    NAIVE = "naive"
    ORACLE = "oracle"
    PROXY = "proxy"
    ADDITIVE = "additive"


class DetectionOptions(BaseModel):
    """Spectral initialization plus profile-likelihood refinement."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    n_restarts: int = Field(default=10, ge=1, description="k-means restarts per attempt")
    max_attempts: int = Field(default=3, ge=1, description="Clustering attempts")
    max_sweeps: int = Field(default=50, ge=0)
    eig_tol: float = Field(default=1e-8, gt=0.0)
    eig_max_iter: int | None = Field(default=None, description="Defaults to 10 * n")
    regularize: bool = Field(default=False, description="Add mean-degree/n to every entry first")
    exhaustive_limit: int = Field(default=2**17, ge=0, description="Max k**n to enumerate")
    identifiability_margin: float = Field(default=0.05, ge=0.0)


class EmbeddingOptions(BaseModel):
    """Multi-restart maximum-likelihood ascent for latent positions."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    method: Literal["gradient", "lbfgs"] = "gradient"
    n_restarts: int = Field(default=20, ge=1)
    max_iter: int = Field(default=5000, ge=1)
    grad_tol: float = Field(default=1e-6, gt=0.0)
    step_size: float = Field(default=0.1, gt=0.0)
    min_step: float = Field(default=1e-14, gt=0.0)
    coincidence_tol: float = Field(default=1e-9, gt=0.0)
    jitter_norm: float = Field(default=1e-6, gt=0.0)


class ControlSpec(BaseModel):
    """Which location block enters the design matrix."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["none", "true", "estimated", "additive"] = "none"
    degree: int = Field(default=2, ge=1, description="Polynomial degree for additive controls")
