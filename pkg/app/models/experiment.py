"""Monte Carlo experiment records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import pandas as pd

from app.models.inference import ReplicationSample

# Row schema shared by the worker, the summary and the CSV round trip
ROW_COLUMNS = [
    "n",
    "replication",
    "strategy",
    "status",
    "beta_hat",
    "beta_se",
    "bias",
    "recovery_error",
    "exact_recovery",
    "mean_in_degree",
    "partial_variance",
    "error",
]


@dataclass(frozen=True)
class ReplicationOutcome:
    """Rows of one (n, replication) task plus what the parent needs for metrics."""

    n: int
    replication: int
    rows: list[dict[str, Any]]
    failed: bool
    duration: float
    # Kept only when the experiment asks for covariance diagnostics
    sample: ReplicationSample | None = None


@dataclass
class ExperimentResult:
    rows: pd.DataFrame
    summary: dict[str, Any]
    failure_rate: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def strategies(self) -> list[str]:
        return list(self.summary["meta"]["strategies"])

    @property
    def n_grid(self) -> list[int]:
        return list(self.summary["meta"]["n_grid"])
