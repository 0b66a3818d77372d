"""Latent-position estimation records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.models.network import LatentPositions


@dataclass(frozen=True)
class IsometryAlignment:
    """Rigid map x -> x @ rotation + translation and the residual distances it leaves."""

    aligned: LatentPositions
    rotation: np.ndarray
    translation: np.ndarray
    error_sum: float
    error_max: float


@dataclass(frozen=True)
class EmbeddingResult:
    coords_hat: LatentPositions
    log_likelihood: float
    converged: bool
    iterations: int
    restart_log_likelihoods: list[float] = field(default_factory=list)
    best_restart: int = 0
    aligned_error_sum: float | None = None
    aligned_error_max: float | None = None

    def summary(self) -> dict[str, object]:
        return {
            "log_likelihood": self.log_likelihood,
            "error_sum": self.aligned_error_sum,
            "error_max": self.aligned_error_max,
            "converged": self.converged,
        }
