"""Behavior simulation from the linear structural equation."""

from typing import Any

import numpy as np
from loguru import logger

from app.core.config.settings import settings
from app.core.exceptions import DomainError, InstabilityError, ShapeError
from app.models.behavior import BehaviorPanel, StabilityReport
from app.models.network import AdjacencyMatrix
from app.schemas.behavior import StructuralCoeffs
from app.schemas.network import as_params

POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000


def exposure_operator(adjacency: AdjacencyMatrix, normalize: bool = False) -> np.ndarray:
    """Matrix mapping Y(., t) to the exposure sum_j A_ij Y(j, t), or its neighbor mean."""
    operator = adjacency.as_float()
    if normalize:
        degrees = operator.sum(axis=1, keepdims=True)
        operator = np.divide(operator, degrees, out=np.zeros_like(operator), where=degrees > 0)
    return operator


def stability_check(
    adjacency: AdjacencyMatrix,
    alpha1: float,
    beta_influence: float,
    normalize_exposure: bool = False,
) -> StabilityReport:
    """Spectral radius of alpha1 * I + beta * A by power iteration on the norm ratio."""
    operator = alpha1 * np.eye(adjacency.n) + beta_influence * exposure_operator(
        adjacency, normalize_exposure
    )
    if not np.any(operator):
        return StabilityReport(radius=0.0, converged=True, iterations=0)

    x = np.random.default_rng(0).standard_normal(adjacency.n)
    x /= np.linalg.norm(x)
    radius = 0.0
    for iteration in range(1, POWER_MAX_ITER + 1):
        y = operator @ x
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return StabilityReport(radius=0.0, converged=True, iterations=iteration)
        if abs(estimate - radius) <= POWER_TOL * max(estimate, 1.0):
            return StabilityReport(radius=estimate, converged=True, iterations=iteration)
        radius = estimate
        x = y / estimate

    logger.warning(f"power iteration did not converge; best radius estimate {radius:.6g}")
    return StabilityReport(radius=radius, converged=False, iterations=POWER_MAX_ITER)


def simulate_panel(
    adjacency: AdjacencyMatrix,
    locations: np.ndarray,
    coeffs: StructuralCoeffs | dict[str, Any],
    T: int = 1,
    seed: int | np.random.SeedSequence | None = None,
    normalize_exposure: bool = False,
) -> BehaviorPanel:
    """Run the structural recursion for T transitions.

    Y(i, 0) starts from the nodal effects plus noise. Noise is drawn fresh for every
    (i, t) even when sigma_eps is 0, so the random stream does not depend on it.
    """
    coeffs = as_params(StructuralCoeffs, coeffs)
    locations = np.asarray(locations, dtype=float)
    n = adjacency.n
    if locations.ndim != 2 or locations.shape != (n, len(coeffs.gamma1)):
        raise ShapeError(
            f"locations must be {n} x {len(coeffs.gamma1)} to match A and gamma1, "
            f"got {locations.shape}"
        )
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")

    rng = np.random.default_rng(seed)
    covariates = rng.standard_normal((n, len(coeffs.gamma2)))
    noise = coeffs.sigma_eps * rng.standard_normal((n, T + 1))
    nodal = coeffs.nodal_effect(locations) + covariates @ coeffs.gamma2_array
    operator = exposure_operator(adjacency, normalize_exposure)

    stability = stability_check(
        adjacency, coeffs.alpha1, coeffs.beta_influence, normalize_exposure
    )
    warnings: list[str] = []
    if stability.radius >= 1.0:
        message = f"spectral radius {stability.radius:.4g} >= 1; the recursion is not stable"
        logger.warning(message)
        warnings.append(message)

    Y = np.empty((n, T + 1))
    Y[:, 0] = nodal + noise[:, 0]
    for t in range(T):
        Y[:, t + 1] = (
            coeffs.alpha0
            + coeffs.alpha1 * Y[:, t]
            + coeffs.beta_influence * (operator @ Y[:, t])
            + nodal
            + noise[:, t + 1]
        )
        current = Y[:, t + 1]
        if not np.all(np.isfinite(current)) or np.abs(current).max() > settings.OVERFLOW_GUARD:
            raise InstabilityError(
                f"behavior diverged at t={t + 1}; spectral radius of "
                f"alpha1*I + beta*A is {stability.radius:.6g}",
                spectral_radius=stability.radius,
            )

    return BehaviorPanel(
        Y=Y,
        X=covariates,
        coeffs=coeffs,
        T=T,
        exposure_normalized=normalize_exposure,
        stability=stability,
        warnings=warnings,
    )
