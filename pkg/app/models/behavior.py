"""Behavior panel records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.schemas.behavior import StructuralCoeffs


@dataclass(frozen=True)
class StabilityReport:
    """Power-iteration estimate of the spectral radius of alpha1 * I + beta * A."""

    radius: float
    converged: bool
    iterations: int

    @property
    def stable(self) -> bool:
        return self.radius < 1.0


@dataclass(frozen=True)
class BehaviorPanel:
    """Simulated outcomes: column t of ``Y`` holds Y(., t) for t = 0..T."""

    Y: np.ndarray
    X: np.ndarray
    coeffs: StructuralCoeffs | None
    T: int
    exposure_normalized: bool = False
    stability: StabilityReport | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.Y.shape[0])

    def lag(self, t: int) -> np.ndarray:
        return self.Y[:, t]

    def response(self, t: int) -> np.ndarray:
        return self.Y[:, t + 1]
