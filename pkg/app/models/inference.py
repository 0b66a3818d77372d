"""Regression and diagnostic records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.models.behavior import BehaviorPanel
from app.models.network import AdjacencyMatrix, CommunityAssignment

BASE_COLUMNS = ("intercept", "lag", "exposure")


@dataclass(frozen=True)
class DesignMatrix:
    """Stacked regression rows; ``rows[r] = (i, t)`` names the node and lag period of row r."""

    response: np.ndarray
    matrix: np.ndarray
    column_names: list[str]
    rows: np.ndarray
    dropped_columns: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def width(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def control_width(self) -> int:
        return self.width - len(BASE_COLUMNS)

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.column_names.index(name)]


@dataclass(frozen=True)
class RegressionFit:
    coeffs: np.ndarray
    std_errors: np.ndarray
    residual_variance: float
    condition_flag: bool
    column_names: list[str]
    n_obs: int
    strategy: str | None = None

    @property
    def beta_hat(self) -> float:
        return float(self.coeffs[self.column_names.index("exposure")])

    @property
    def beta_se(self) -> float:
        return float(self.std_errors[self.column_names.index("exposure")])

    def coefficient(self, name: str) -> float:
        return float(self.coeffs[self.column_names.index(name)])

    def control_coefficients(self, linear_only: bool = True) -> np.ndarray:
        """gamma0-hat: the control block, optionally without polynomial terms."""
        picked = [
            value
            for name, value in zip(self.column_names, self.coeffs, strict=True)
            if name.startswith("ctrl_") and (not linear_only or "^" not in name)
        ]
        return np.asarray(picked, dtype=float)

    def to_dict(self) -> dict[str, object]:
        return {
            "strategy": self.strategy,
            "columns": self.column_names,
            "coeffs": self.coeffs.tolist(),
            "std_errors": self.std_errors.tolist(),
            "residual_variance": self.residual_variance,
            "condition_flag": self.condition_flag,
        }


@dataclass(frozen=True)
class ReplicationSample:
    """What the covariance diagnostics need from one community-setting replication.

    ``sigma_hat`` must already be aligned to the truth's labels.
    """

    adjacency: AdjacencyMatrix
    sigma_true: CommunityAssignment
    sigma_hat: CommunityAssignment
    panel: BehaviorPanel
    gamma0: np.ndarray | None = None

    @property
    def exact_recovery(self) -> bool:
        return bool(np.array_equal(self.sigma_true.sigma, self.sigma_hat.sigma))


@dataclass(frozen=True)
class StratumDiagnostic:
    """Both sides of the alter-behavior covariance identity within one (C-hat_i, C-hat_j) cell."""

    cell: tuple[int, int]
    count: int
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    joint_se: float

    @property
    def z_score(self) -> float:
        if self.joint_se == 0.0:
            return 0.0 if self.lhs == self.rhs else float("inf")
        return (self.lhs - self.rhs) / self.joint_se

    def to_dict(self) -> dict[str, object]:
        return {
            "cell": list(self.cell),
            "count": self.count,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "lhs_se": self.lhs_se,
            "rhs_se": self.rhs_se,
            "joint_se": self.joint_se,
        }


@dataclass(frozen=True)
class CovarianceDiagnostic:
    strata: list[StratumDiagnostic]
    excluded_cells: list[tuple[int, int]]
    lhs: float
    rhs: float
    mc_error: tuple[float, float]
    gamma0: np.ndarray

    def agrees(self, tolerance_se: float = 3.0) -> bool:
        return all(abs(s.z_score) <= tolerance_se for s in self.strata)

    def to_dict(self) -> dict[str, object]:
        return {
            "strata": [stratum.to_dict() for stratum in self.strata],
            "excluded_cells": [list(cell) for cell in self.excluded_cells],
            "lhs": self.lhs,
            "rhs": self.rhs,
            "mc_error": list(self.mc_error),
            "gamma0": self.gamma0.tolist(),
            "agrees": self.agrees(),
        }


@dataclass(frozen=True)
class DecompositionCell:
    """Conditional covariance of (C_i, C_j) in one cell against its failure-event decomposition."""

    cell: tuple[int, int]
    count: int
    delta: float
    lhs: np.ndarray
    rhs: np.ndarray
    rhs_published: np.ndarray
    c_tilde_i: np.ndarray
    c_tilde_j: np.ndarray

    @property
    def gap(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))

    def to_dict(self) -> dict[str, object]:
        return {
            "cell": list(self.cell),
            "count": self.count,
            "delta": self.delta,
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "rhs_published": self.rhs_published.tolist(),
            "gap": self.gap,
        }


@dataclass(frozen=True)
class DecompositionReport:
    cells: list[DecompositionCell]
    excluded_cells: list[tuple[int, int]]
    delta_hat: float | None
    trivial: bool

    @property
    def max_gap(self) -> float:
        return max((c.gap for c in self.cells), default=0.0)

    def to_dict(self) -> dict[str, object]:
        return {
            "cells": [cell.to_dict() for cell in self.cells],
            "excluded_cells": [list(cell) for cell in self.excluded_cells],
            "delta_hat": self.delta_hat,
            "trivial": self.trivial,
            "max_gap": self.max_gap,
        }
