"""Effective-model regressions and the covariance identities behind their bias.

The design stacks rows (i, t) with columns intercept, lag Y(i, t), exposure
sum_j A_ij Y(j, t) and an optional control block. Fits report classical standard errors
only; pooled designs get no serial-correlation correction.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
import statsmodels.api as sm
from loguru import logger
from scipy.linalg import qr

from app.core.config.settings import settings
from app.core.exceptions import ConfigurationError, DomainError, RankDeficiencyError, ShapeError
from app.models.behavior import BehaviorPanel
from app.models.inference import (
    BASE_COLUMNS,
    CovarianceDiagnostic,
    DecompositionCell,
    DecompositionReport,
    DesignMatrix,
    RegressionFit,
    ReplicationSample,
    StratumDiagnostic,
)
from app.models.network import AdjacencyMatrix, CommunityAssignment
from app.schemas.network import as_params
from app.schemas.options import ControlSpec, Strategy
from app.services.behavior import exposure_operator
from app.services.netgen import dummy_encode

CONDITION_THRESHOLD = 1e-10

STRATEGY_CONTROLS = {
    Strategy.NAIVE: "none",
    Strategy.ORACLE: "true",
    Strategy.PROXY: "estimated",
    Strategy.ADDITIVE: "additive",
}


def _control_block(
    control: ControlSpec, locations: np.ndarray | None, n: int
) -> tuple[np.ndarray, list[str]]:
    if control.kind == "none":
        return np.empty((n, 0)), []
    if locations is None:
        raise ConfigurationError(f"control '{control.kind}' needs a location matrix")
    locations = np.asarray(locations, dtype=float)
    if locations.ndim != 2 or locations.shape[0] != n:
        raise ShapeError(f"locations must have {n} rows, got shape {locations.shape}")
    names = [f"ctrl_{j + 1}" for j in range(locations.shape[1])]
    if control.kind != "additive":
        return locations, names
    blocks, expanded = [], []
    for j, name in enumerate(names):
        for power in range(1, control.degree + 1):
            blocks.append(locations[:, j] ** power)
            expanded.append(name if power == 1 else f"{name}^{power}")
    return np.column_stack(blocks), expanded


def _prune_controls(
    block: np.ndarray, names: list[str]
) -> tuple[np.ndarray, list[str], list[str]]:
    """Drop constant columns and exact duplicates of an earlier control column."""
    keep: list[int] = []
    dropped: list[str] = []
    for j in range(block.shape[1]):
        column = block[:, j]
        if np.all(column == column[0]) or any(np.array_equal(column, block[:, i]) for i in keep):
            dropped.append(names[j])
        else:
            keep.append(j)
    return block[:, keep], [names[j] for j in keep], dropped


def build_design(
    panel: BehaviorPanel,
    adjacency: AdjacencyMatrix,
    control: ControlSpec | dict[str, Any] | None = None,
    locations: np.ndarray | None = None,
    pooled: bool = False,
) -> DesignMatrix:
    """Stack regression rows; only the first transition unless ``pooled``."""
    control = as_params(ControlSpec, control or {})
    n = adjacency.n
    if panel.n != n:
        raise ShapeError(f"panel has {panel.n} nodes, adjacency has {n}")
    block, names = _control_block(control, locations, n)
    block, names, dropped = _prune_controls(block, names) if names else (block, names, [])
    warnings = []
    if dropped:
        message = f"dropped degenerate control columns {dropped}"
        logger.warning(message)
        warnings.append(message)

    operator = exposure_operator(adjacency, panel.exposure_normalized)
    periods = range(panel.T) if pooled else range(1)
    responses, rows, matrices = [], [], []
    for t in periods:
        lag = panel.lag(t)
        responses.append(panel.response(t))
        matrices.append(np.column_stack([np.ones(n), lag, operator @ lag, block]))
        rows.append(np.column_stack([np.arange(n), np.full(n, t)]))

    return DesignMatrix(
        response=np.concatenate(responses),
        matrix=np.vstack(matrices),
        column_names=list(BASE_COLUMNS) + names,
        rows=np.vstack(rows),
        dropped_columns=dropped,
        warnings=warnings,
    )


def _dependent_columns(matrix: np.ndarray, names: list[str], rank: int) -> list[str]:
    _, _, pivots = qr(matrix, mode="economic", pivoting=True)
    return [names[j] for j in sorted(pivots[rank:])]


def fit_ols(design: DesignMatrix, strategy: str | None = None) -> RegressionFit:
    """Least squares via statsmodels' QR solver, after rank and conditioning checks."""
    X, y = design.matrix, design.response
    m, width = X.shape
    if m <= width:
        raise DomainError(f"need more rows than columns, got {m} rows for {width} columns")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("design contains non-finite entries")

    singular = np.linalg.svd(X, compute_uv=False)
    tolerance = singular[0] * max(m, width) * np.finfo(float).eps
    rank = int(np.sum(singular > tolerance))
    if rank < width:
        dependent = _dependent_columns(X, design.column_names, rank)
        raise RankDeficiencyError(
            f"design has rank {rank} < {width}; dependent columns: {dependent}",
            dependent_columns=dependent,
        )
    ratio = singular[-1] / singular[0]

    results = sm.OLS(y, X).fit(method="qr")
    return RegressionFit(
        coeffs=np.asarray(results.params, dtype=float),
        std_errors=np.asarray(results.bse, dtype=float),
        residual_variance=float(results.scale),
        condition_flag=bool(ratio < CONDITION_THRESHOLD),
        column_names=list(design.column_names),
        n_obs=m,
        strategy=strategy,
    )


def estimate_influence(
    panel: BehaviorPanel,
    adjacency: AdjacencyMatrix,
    strategy: Strategy | str,
    locations: np.ndarray | None = None,
    degree: int = 2,
    pooled: bool = False,
) -> RegressionFit:
    """Fit the effective model; ``locations`` are true for oracle and estimated otherwise."""
    strategy = Strategy(strategy)
    kind = STRATEGY_CONTROLS[strategy]
    if kind != "none" and locations is None:
        needed = "true" if strategy is Strategy.ORACLE else "estimated"
        raise ConfigurationError(f"strategy '{strategy.value}' requires {needed} locations")
    design = build_design(
        panel,
        adjacency,
        ControlSpec(kind=kind, degree=degree),
        locations if kind != "none" else None,
        pooled,
    )
    return fit_ols(design, strategy=strategy.value)


def exposure_partial_variance(design: DesignMatrix) -> float:
    """Mean squared residual of the exposure column regressed on every other column."""
    exposure = design.column("exposure")
    others = np.delete(design.matrix, design.column_names.index("exposure"), axis=1)
    residual = sm.OLS(exposure, others).fit().resid
    return float(residual @ residual / design.m)


def _baseline(assignment: CommunityAssignment, label: int) -> np.ndarray:
    vertex = np.zeros(assignment.k - 1)
    if label < assignment.k:
        vertex[label - 1] = 1.0
    return vertex


def _linked_pairs(samples: Sequence[ReplicationSample]) -> list[dict[str, np.ndarray]]:
    """Per replication: ordered linked pairs (i receives from j) with their estimated cells."""
    if not samples:
        raise DomainError("diagnostics need at least one replication")
    out = []
    for sample in samples:
        if sample.sigma_true.k < 2:
            raise DomainError("covariance diagnostics need at least two blocks")
        receivers, senders = np.nonzero(sample.adjacency.edges)
        out.append(
            {
                "i": receivers,
                "j": senders,
                "cell_i": sample.sigma_hat.sigma[receivers],
                "cell_j": sample.sigma_hat.sigma[senders],
            }
        )
    return out


def _clustered_mean_se(values: np.ndarray, clusters: np.ndarray) -> float:
    """Standard error of the mean of ``values`` with replications as clusters."""
    if values.size == 0 or np.ptp(values) == 0.0:
        return 0.0
    results = sm.OLS(values, np.ones(values.size)).fit(
        cov_type="cluster", cov_kwds={"groups": clusters, "use_correction": False}
    )
    return float(results.bse[0])


def lemma2_diagnostic(
    samples: Sequence[ReplicationSample],
    gamma0: np.ndarray | None = None,
    min_count: int | None = None,
) -> CovarianceDiagnostic:
    """Alter-behavior covariance with the control error against the location covariance.

    Within each (C-hat_i, C-hat_j) cell and over ordered linked pairs at t = 0:
    lhs = Cov(Y(j, 0), gamma1'C_i - gamma0'C-hat_i) and rhs = Cov(gamma1'C_j, gamma1'C_i).
    Standard errors are cluster-robust by replication.
    """
    min_count = settings.MIN_STRATUM_COUNT if min_count is None else min_count
    pairs = _linked_pairs(samples)
    if gamma0 is None:
        fitted = [s.gamma0 for s in samples if s.gamma0 is not None]
        if not fitted:
            raise ConfigurationError("supply gamma0 or replications carrying a fitted gamma0")
        gamma0 = np.mean(fitted, axis=0)
    gamma0 = np.asarray(gamma0, dtype=float)

    columns: dict[str, list[np.ndarray]] = {k: [] for k in ("rep", "a", "b", "u", "v", "w", "z")}
    for rep, (sample, linked) in enumerate(zip(samples, pairs, strict=True)):
        if sample.panel.coeffs is None:
            raise ConfigurationError("diagnostics need the generating coefficients")
        gamma1 = sample.panel.coeffs.gamma1_array
        if gamma0.shape != gamma1.shape:
            raise ShapeError(f"gamma0 has shape {gamma0.shape}, gamma1 has {gamma1.shape}")
        loading_true = dummy_encode(sample.sigma_true) @ gamma1
        loading_hat = dummy_encode(sample.sigma_hat) @ gamma0
        i, j = linked["i"], linked["j"]
        columns["rep"].append(np.full(i.size, rep))
        columns["a"].append(linked["cell_i"])
        columns["b"].append(linked["cell_j"])
        columns["u"].append(sample.panel.Y[j, 0])
        columns["v"].append(loading_true[i] - loading_hat[i])
        columns["w"].append(loading_true[j])
        columns["z"].append(loading_true[i])
    data = {key: np.concatenate(parts) for key, parts in columns.items()}

    strata: list[StratumDiagnostic] = []
    excluded: list[tuple[int, int]] = []
    psi_lhs = np.zeros(data["u"].size)
    psi_rhs = np.zeros(data["u"].size)
    used = np.zeros(data["u"].size, dtype=bool)
    cells = sorted({(int(a), int(b)) for a, b in zip(data["a"], data["b"], strict=True)})
    for cell in cells:
        mask = (data["a"] == cell[0]) & (data["b"] == cell[1])
        count = int(mask.sum())
        if count < min_count:
            excluded.append(cell)
            continue
        u, v, w, z = (data[key][mask] for key in ("u", "v", "w", "z"))
        cross_lhs = (u - u.mean()) * (v - v.mean())
        cross_rhs = (w - w.mean()) * (z - z.mean())
        lhs, rhs = float(cross_lhs.mean()), float(cross_rhs.mean())
        reps = data["rep"][mask]
        strata.append(
            StratumDiagnostic(
                cell=cell,
                count=count,
                lhs=lhs,
                rhs=rhs,
                lhs_se=_clustered_mean_se(cross_lhs, reps),
                rhs_se=_clustered_mean_se(cross_rhs, reps),
                joint_se=_clustered_mean_se(cross_lhs - cross_rhs, reps),
            )
        )
        psi_lhs[mask] = cross_lhs
        psi_rhs[mask] = cross_rhs
        used[mask] = True

    if excluded:
        logger.warning(
            f"excluded {len(excluded)} cells with fewer than {min_count} pairs: {excluded}"
        )
    total = int(used.sum())
    lhs_all = float(psi_lhs[used].mean()) if total else 0.0
    rhs_all = float(psi_rhs[used].mean()) if total else 0.0
    reps_used = data["rep"][used]
    return CovarianceDiagnostic(
        strata=strata,
        excluded_cells=excluded,
        lhs=lhs_all,
        rhs=rhs_all,
        mc_error=(
            _clustered_mean_se(psi_lhs[used], reps_used),
            _clustered_mean_se(psi_rhs[used], reps_used),
        ),
        gamma0=gamma0,
    )


def _cross_covariance(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if left.shape[0] == 0:
        return np.zeros((left.shape[1], right.shape[1]))
    return (left - left.mean(axis=0)).T @ (right - right.mean(axis=0)) / left.shape[0]


def lemma3_diagnostic(
    samples: Sequence[ReplicationSample],
    delta_hat: float | None = None,
    min_count: int | None = None,
) -> DecompositionReport:
    """Cov(C_i, C_j | cell) against its split over the exact-recovery event G.

    With E[C | G = 1] = C-hat the decomposition is
    delta * (Cov_{G=0} + (1 - delta) (C~_i - C-hat_i)(C~_j - C-hat_j)'), which is exact
    in-sample when delta is the cell's share of pairs from failed replications. A supplied
    ``delta_hat`` replaces that share as a plug-in.
    """
    if delta_hat is not None and not 0.0 <= delta_hat <= 1.0:
        raise DomainError(f"delta_hat must lie in [0, 1], got {delta_hat}")
    min_count = settings.MIN_STRATUM_COUNT if min_count is None else min_count
    pairs = _linked_pairs(samples)

    left, right, failed, cell_a, cell_b = [], [], [], [], []
    for sample, linked in zip(samples, pairs, strict=True):
        encoded = dummy_encode(sample.sigma_true)
        left.append(encoded[linked["i"]])
        right.append(encoded[linked["j"]])
        failed.append(np.full(linked["i"].size, not sample.exact_recovery))
        cell_a.append(linked["cell_i"])
        cell_b.append(linked["cell_j"])
    c_i, c_j = np.vstack(left), np.vstack(right)
    g0, a_all, b_all = np.concatenate(failed), np.concatenate(cell_a), np.concatenate(cell_b)
    reference = samples[0].sigma_true

    cells: list[DecompositionCell] = []
    excluded: list[tuple[int, int]] = []
    for cell in sorted({(int(a), int(b)) for a, b in zip(a_all, b_all, strict=True)}):
        mask = (a_all == cell[0]) & (b_all == cell[1])
        count = int(mask.sum())
        if count < min_count:
            excluded.append(cell)
            continue
        hat_i, hat_j = _baseline(reference, cell[0]), _baseline(reference, cell[1])
        fail = mask & g0
        share = fail.sum() / count
        delta = share if delta_hat is None else delta_hat
        if fail.any():
            tilde_i, tilde_j = c_i[fail].mean(axis=0), c_j[fail].mean(axis=0)
            cov_g0 = _cross_covariance(c_i[fail], c_j[fail])
        else:
            tilde_i, tilde_j = hat_i, hat_j
            cov_g0 = np.zeros((hat_i.size, hat_j.size))
        rhs = delta * (cov_g0 + (1.0 - delta) * np.outer(tilde_i - hat_i, tilde_j - hat_j))
        published = delta * (
            cov_g0
            + (1.0 - delta) * np.outer(tilde_i, tilde_j)
            - np.outer(hat_i, hat_j)
            - np.outer(hat_i, tilde_j)
            - np.outer(tilde_i, hat_j)
        )
        cells.append(
            DecompositionCell(
                cell=cell,
                count=count,
                delta=float(delta),
                lhs=_cross_covariance(c_i[mask], c_j[mask]),
                rhs=rhs,
                rhs_published=published,
                c_tilde_i=tilde_i,
                c_tilde_j=tilde_j,
            )
        )

    if excluded:
        logger.warning(
            f"excluded {len(excluded)} cells with fewer than {min_count} pairs: {excluded}"
        )
    trivial = not g0.any() or delta_hat == 0.0
    return DecompositionReport(
        cells=cells, excluded_cells=excluded, delta_hat=delta_hat, trivial=trivial
    )
