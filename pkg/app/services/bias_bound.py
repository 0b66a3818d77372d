"""Finite-sample confounding bound by exact vertex enumeration.

For a fixed sign of the capped Cov_{G=0} term the objective is bilinear in the
conditional means (C~_i, C~_j), so its extremes over the product of simplices sit
at vertex pairs. The worst Cov_{G=0} with entries in [-cap, cap] contributes
+/- cap * ||gamma||_1^2.
"""

from itertools import product
from typing import Any

import numpy as np

from app.core.exceptions import ConfigurationError, DomainError, ShapeError
from app.models.bound import BoundResult
from app.models.inference import RegressionFit
from app.schemas.bound import MAX_INDICATOR_COVARIANCE, BoundInput, Decomposition
from app.schemas.network import as_params


def bias_quadform(gamma1: np.ndarray, cov_matrix: np.ndarray) -> float:
    gamma1 = np.asarray(gamma1, dtype=float)
    cov_matrix = np.asarray(cov_matrix, dtype=float)
    if gamma1.ndim != 1 or cov_matrix.shape != (gamma1.size, gamma1.size):
        raise ShapeError(
            f"need a length-w vector and a w x w matrix, "
            f"got {gamma1.shape} and {cov_matrix.shape}"
        )
    return float(gamma1 @ cov_matrix @ gamma1)


def simplex_vertices(width: int) -> list[np.ndarray]:
    """The origin and the unit vectors: the k = width + 1 dummy encodings."""
    return [np.zeros(width)] + list(np.eye(width))


def _pair_value(
    bound_input: BoundInput, tilde_i: np.ndarray, tilde_j: np.ndarray, cap_sign: int
) -> float:
    gamma = np.asarray(bound_input.gamma1, dtype=float)
    hat_i = np.asarray(bound_input.c_hat_i, dtype=float)
    hat_j = np.asarray(bound_input.c_hat_j, dtype=float)
    delta = bound_input.delta
    cap_term = cap_sign * bound_input.cov_g0_cap * np.abs(gamma).sum() ** 2
    if bound_input.decomposition == "corrected":
        spread = (gamma @ (tilde_i - hat_i)) * (gamma @ (tilde_j - hat_j))
        inner = cap_term + (1.0 - delta) * spread
    else:
        gt_i, gt_j, gh_i, gh_j = gamma @ tilde_i, gamma @ tilde_j, gamma @ hat_i, gamma @ hat_j
        inner = cap_term + (1.0 - delta) * gt_i * gt_j - gh_i * gh_j - gh_i * gt_j - gt_i * gh_j
    return abs(delta * inner)


def max_bias_bound(bound_input: BoundInput | dict[str, Any]) -> BoundResult:
    """Maximize |gamma' Cov(C_i, C_j | C-hat) gamma| over vertex pairs and both cap signs."""
    bound_input = as_params(BoundInput, bound_input)
    vertices = simplex_vertices(len(bound_input.gamma1))
    best = (-1.0, vertices[0], vertices[0], 1)
    for tilde_i, tilde_j, cap_sign in product(vertices, vertices, (1, -1)):
        value = _pair_value(bound_input, tilde_i, tilde_j, cap_sign)
        if value > best[0]:
            best = (value, tilde_i, tilde_j, cap_sign)
    value, tilde_i, tilde_j, cap_sign = best
    per_pair = bound_input.in_degree is None
    if not per_pair:
        value *= bound_input.in_degree
    return BoundResult(
        bound_value=float(value),
        argmax_pair=(tilde_i, tilde_j),
        per_pair=per_pair,
        delta=bound_input.delta,
        gamma_source=bound_input.gamma_source,
        cap_sign=cap_sign,
        plug_in=bound_input.gamma_source == "estimated",
    )


def bound_with_estimated_gamma(
    fit: RegressionFit,
    delta_hat: float,
    c_hat_i: np.ndarray,
    c_hat_j: np.ndarray,
    cov_g0_cap: float = MAX_INDICATOR_COVARIANCE,
    decomposition: Decomposition = "corrected",
    in_degree: int | None = None,
) -> BoundResult:
    """Plug-in bound with gamma1 replaced by the fitted control coefficients gamma0-hat."""
    gamma0 = fit.control_coefficients()
    if gamma0.size == 0:
        raise ConfigurationError(
            f"fit for strategy '{fit.strategy}' has no control block to use as gamma0"
        )
    return max_bias_bound(
        BoundInput(
            delta=delta_hat,
            gamma1=gamma0.tolist(),
            c_hat_i=np.asarray(c_hat_i, dtype=float).tolist(),
            c_hat_j=np.asarray(c_hat_j, dtype=float).tolist(),
            cov_g0_cap=cov_g0_cap,
            decomposition=decomposition,
            in_degree=in_degree,
            gamma_source="estimated",
        )
    )


def worst_case_bias_bound(
    gamma: np.ndarray,
    delta: float,
    mean_in_degree: float,
    partial_variance: float,
    cov_g0_cap: float = MAX_INDICATOR_COVARIANCE,
    decomposition: Decomposition = "corrected",
) -> float:
    """Largest per-pair bound over every observed cell, in units of beta-hat.

    The per-pair covariance bound is summed over an average in-neighborhood and divided
    by the exposure variance left after partialling out the other regressors.
    """
    if partial_variance <= 0.0:
        raise DomainError(f"partial variance must be positive, got {partial_variance}")
    gamma = np.asarray(gamma, dtype=float)
    worst = 0.0
    for hat_i, hat_j in product(simplex_vertices(gamma.size), repeat=2):
        result = max_bias_bound(
            {
                "delta": delta,
                "gamma1": gamma.tolist(),
                "c_hat_i": hat_i.tolist(),
                "c_hat_j": hat_j.tolist(),
                "cov_g0_cap": cov_g0_cap,
                "decomposition": decomposition,
            }
        )
        worst = max(worst, result.bound_value)
    return worst * mean_in_degree / partial_variance
