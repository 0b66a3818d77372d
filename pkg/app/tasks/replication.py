"""One Monte Carlo replication: generate, simulate, recover, fit every strategy.

Runs inside worker processes, so it only returns data; metrics are observed by the
parent when the outcome comes back.
"""

import time
from typing import Any, NamedTuple

import numpy as np
from loguru import logger

from app.core.exceptions import PeerInfluenceError
from app.models.behavior import BehaviorPanel
from app.models.experiment import ReplicationOutcome
from app.models.inference import ReplicationSample
from app.models.network import AdjacencyMatrix, CommunityAssignment
from app.schemas.experiment import ExperimentConfig
from app.schemas.options import ControlSpec, Strategy
from app.services.behavior import simulate_panel
from app.services.communities import align_labels, corrupt_labels, detect_communities
from app.services.embedding import embed_mle
from app.services.inference import (
    STRATEGY_CONTROLS,
    build_design,
    exposure_partial_variance,
    fit_ols,
)
from app.services.netgen import dummy_encode, sample_lsp, sample_sbm

NAN = float("nan")


def replication_seed(master: int, n: int, replication: int) -> np.random.SeedSequence:
    """Counter-style seed: independent of the order in which tasks run."""
    return np.random.SeedSequence(master, spawn_key=(n, replication))


def _derived_int(seed: np.random.SeedSequence) -> int:
    return int(seed.generate_state(1)[0])


class Recovery(NamedTuple):
    """One replication's network, panel, true and estimated locations."""

    adjacency: AdjacencyMatrix
    panel: BehaviorPanel
    truth: np.ndarray
    estimate: np.ndarray
    error: float
    exact: bool | None
    # Aligned (true, estimated) labels; community setting only
    labels: tuple[CommunityAssignment, CommunityAssignment] | None = None


def _recover(config: ExperimentConfig, n: int, seeds: list[np.random.SeedSequence]) -> Recovery:
    network_seed, panel_seed, recovery_seed = seeds
    if config.setting == "community":
        assert config.sbm is not None
        adjacency, sigma = sample_sbm(config.sbm, n, network_seed)
        truth = dummy_encode(sigma)
        panel = simulate_panel(
            adjacency, truth, config.coeffs, config.T, panel_seed, config.normalize_exposure
        )
        if config.inject_truth_as_proxy:
            sigma_hat, error = sigma, 0.0
        elif config.label_noise is not None:
            sigma_hat = corrupt_labels(sigma, config.label_noise, recovery_seed)
            error = align_labels(sigma_hat, sigma)[1]
        else:
            options = config.detection.model_copy(update={"seed": _derived_int(recovery_seed)})
            detection = detect_communities(adjacency, config.sbm.k, options, sigma_true=sigma)
            sigma_hat = detection.aligned()
            error = float(detection.misclassification_rate or 0.0)
        return Recovery(
            adjacency,
            panel,
            truth,
            dummy_encode(sigma_hat),
            error,
            error == 0.0,
            (sigma, sigma_hat),
        )

    assert config.lsp is not None
    adjacency, positions = sample_lsp(config.lsp, n, network_seed)
    panel = simulate_panel(
        adjacency, positions.coords, config.coeffs, config.T, panel_seed, config.normalize_exposure
    )
    if config.inject_truth_as_proxy:
        return Recovery(adjacency, panel, positions.coords, positions.coords, 0.0, None)
    options = config.embedding.model_copy(update={"seed": _derived_int(recovery_seed)})
    embedding = embed_mle(adjacency, config.lsp, options, coords_true=positions)
    error = float(embedding.aligned_error_max or 0.0)
    return Recovery(adjacency, panel, positions.coords, embedding.coords_hat.coords, error, None)


def _fit_row(
    config: ExperimentConfig,
    strategy: Strategy,
    panel: BehaviorPanel,
    adjacency: AdjacencyMatrix,
    truth: np.ndarray,
    estimate: np.ndarray,
) -> dict[str, Any]:
    kind = STRATEGY_CONTROLS[strategy]
    locations = truth if strategy is Strategy.ORACLE else estimate
    design = build_design(
        panel,
        adjacency,
        ControlSpec(kind=kind, degree=config.additive_degree),
        None if kind == "none" else locations,
        config.pooled,
    )
    fit = fit_ols(design, strategy=strategy.value)
    row: dict[str, Any] = {
        "status": "ok",
        "beta_hat": fit.beta_hat,
        "beta_se": fit.beta_se,
        "bias": fit.beta_hat - config.coeffs.beta_influence,
        "partial_variance": exposure_partial_variance(design),
        "error": "",
    }
    for j in range(config.location_width):
        name = f"ctrl_{j + 1}"
        key = f"gamma0_{j + 1}"
        row[key] = fit.coefficient(name) if name in fit.column_names else NAN
    return row


def _failed_row(config: ExperimentConfig, message: str) -> dict[str, Any]:
    row: dict[str, Any] = {
        "status": "failed",
        "beta_hat": NAN,
        "beta_se": NAN,
        "bias": NAN,
        "recovery_error": NAN,
        "exact_recovery": None,
        "mean_in_degree": NAN,
        "partial_variance": NAN,
        "error": message,
    }
    row.update({f"gamma0_{j + 1}": NAN for j in range(config.location_width)})
    return row


def _diagnostic_sample(
    recovery: Recovery, rows: list[dict[str, Any]], width: int
) -> ReplicationSample | None:
    """Ensemble member for the covariance diagnostics, carrying the proxy fit's gamma0."""
    if recovery.labels is None:
        return None
    sigma, sigma_hat = recovery.labels
    gamma0 = None
    for row in rows:
        if row["strategy"] == Strategy.PROXY.value:
            fitted = np.array([row[f"gamma0_{j + 1}"] for j in range(width)], dtype=float)
            gamma0 = fitted if np.all(np.isfinite(fitted)) else None
    return ReplicationSample(recovery.adjacency, sigma, sigma_hat, recovery.panel, gamma0)


def run_replication(config: ExperimentConfig, n: int, replication: int) -> ReplicationOutcome:
    started = time.perf_counter()
    seeds = replication_seed(config.seed, n, replication).spawn(3)
    rows: list[dict[str, Any]] = []
    sample = None
    failed = False
    try:
        recovery = _recover(config, n, seeds)
        shared = {
            "recovery_error": recovery.error,
            "exact_recovery": recovery.exact,
            "mean_in_degree": float(recovery.adjacency.in_degrees().mean()),
        }
        for strategy in config.strategies:
            row = _fit_row(
                config,
                strategy,
                recovery.panel,
                recovery.adjacency,
                recovery.truth,
                recovery.estimate,
            )
            key = {"n": n, "replication": replication, "strategy": strategy.value}
            rows.append(key | shared | row)
        if config.diagnostics:
            sample = _diagnostic_sample(recovery, rows, config.location_width)
    except (PeerInfluenceError, np.linalg.LinAlgError, ValueError) as exc:
        failed = True
        logger.bind(n=n, replication=replication).error(f"replication failed: {exc}")
        rows = [
            {"n": n, "replication": replication, "strategy": strategy.value}
            | _failed_row(config, str(exc))
            for strategy in config.strategies
        ]
    return ReplicationOutcome(
        n=n,
        replication=replication,
        rows=rows,
        failed=failed,
        duration=time.perf_counter() - started,
        sample=sample,
    )
