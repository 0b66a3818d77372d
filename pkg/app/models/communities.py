"""Community-detection records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.models.network import CommunityAssignment


@dataclass(frozen=True)
class DetectionResult:
    """Recovered assignment; alignment fields are set only when the truth was supplied."""

    sigma_hat: CommunityAssignment
    log_likelihood: float
    sweeps: int
    converged: bool
    identifiable: bool
    signal_to_bulk: float
    exhaustive: bool = False
    misclassification_rate: float | None = None
    exact_recovery: bool | None = None
    permutation: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    def aligned(self) -> CommunityAssignment:
        """sigma_hat relabeled into the truth's label space (identity if never aligned)."""
        if self.permutation is None:
            return self.sigma_hat
        return self.sigma_hat.relabel(self.permutation)

    def summary(self) -> dict[str, object]:
        return {
            "misclassification_rate": self.misclassification_rate,
            "exact_recovery": self.exact_recovery,
            "permutation": None if self.permutation is None else self.permutation.tolist(),
            "log_likelihood": self.log_likelihood,
            "identifiable": self.identifiable,
        }


@dataclass(frozen=True)
class DeltaEstimate:
    """Share of replications without exact recovery, with its binomial interval."""

    delta_hat: float
    ci_low: float
    ci_high: float
    failures: int
    replications: int
    level: float


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through log(delta_hat) against n."""

    slope: float
    intercept: float
    slope_ci: tuple[float, float]
    points: int

    @property
    def exponent(self) -> float:
        """The c in delta(n) ~ exp(-c n)."""
        return -self.slope

    @property
    def decaying(self) -> bool:
        return self.slope_ci[1] < 0.0
