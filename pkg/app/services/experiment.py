"""Monte Carlo orchestration over the (n, replication) grid and its summary statistics.

Every summary number except the optional ``diagnostics`` block is a function of the raw
rows plus ``meta``, so it can be recomputed from ``rows.csv`` alone. The diagnostics need
the networks and panels themselves, which are not stored.
"""

from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from app.core.config.settings import settings
from app.core.exceptions import DomainError, PeerInfluenceError
from app.core.metrics import REPLICATION_DURATION_SECONDS, REPLICATIONS_TOTAL
from app.models.experiment import ROW_COLUMNS, ExperimentResult, ReplicationOutcome
from app.schemas.experiment import ExperimentConfig
from app.schemas.options import Strategy
from app.services.bias_bound import worst_case_bias_bound
from app.services.communities import estimate_delta, fit_recovery_decay
from app.services.inference import lemma2_diagnostic, lemma3_diagnostic
from app.tasks.replication import run_replication

# Which fitted control block stands in for gamma1 in the plug-in bound
BOUND_SOURCES = (Strategy.PROXY.value, Strategy.ADDITIVE.value, Strategy.ORACLE.value)


def resolve_workers(requested: int | None) -> int:
    """Requested worker count, capped by PEERINF_MAX_WORKERS when that is set."""
    workers = requested or 1
    if settings.MAX_WORKERS is not None:
        workers = min(workers, settings.MAX_WORKERS)
    return max(workers, 1)


def _execute(config: ExperimentConfig, workers: int) -> list[ReplicationOutcome]:
    tasks = [(n, rep) for n in config.n_grid for rep in range(config.replications)]
    if workers == 1:
        return [run_replication(config, n, rep) for n, rep in tasks]
    ns, reps = zip(*tasks, strict=True)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_replication, repeat(config), ns, reps))


def _as_flags(series: pd.Series) -> np.ndarray:
    """Exact-recovery column as 1.0 / 0.0 / nan, whether it holds bools or CSV text."""
    lookup = {True: 1.0, False: 0.0, "True": 1.0, "False": 0.0}
    return np.array([lookup.get(value, np.nan) for value in series], dtype=float)


def _finite(value: float) -> float | None:
    return float(value) if np.isfinite(value) else None


def _strategy_summary(frame: pd.DataFrame, beta: float, level: float) -> dict[str, Any]:
    ok = frame[frame["status"] == "ok"]
    estimates = ok["beta_hat"].to_numpy(dtype=float)
    count = estimates.size
    mean = float(estimates.mean()) if count else np.nan
    se = float(estimates.std(ddof=1) / np.sqrt(count)) if count > 1 else np.nan
    z = float(stats.norm.ppf((1.0 + level) / 2.0))
    bias = mean - beta
    errors = ok["recovery_error"].to_numpy(dtype=float)
    return {
        "count": int(count),
        "mean_beta_hat": _finite(mean),
        "bias": _finite(bias),
        "abs_bias": _finite(abs(bias)),
        "mc_se": _finite(se),
        "ci_low": _finite(bias - z * se),
        "ci_high": _finite(bias + z * se),
        "median_recovery_error": _finite(float(np.median(errors))) if errors.size else None,
    }


def _plug_in_bound(frame: pd.DataFrame, delta_hat: float, width: int) -> float | None:
    ok = frame[frame["status"] == "ok"]
    for source in BOUND_SOURCES:
        rows = ok[ok["strategy"] == source]
        if rows.empty:
            continue
        gamma = rows[[f"gamma0_{j + 1}" for j in range(width)]].to_numpy(dtype=float)
        if not np.isfinite(gamma).any():
            continue
        gamma = np.nan_to_num(np.nanmean(gamma, axis=0))
        try:
            return worst_case_bias_bound(
                gamma,
                delta_hat,
                float(rows["mean_in_degree"].mean()),
                float(rows["partial_variance"].mean()),
            )
        except PeerInfluenceError as exc:
            logger.warning(f"bias bound unavailable: {exc}")
            return None
    return None


def summarize_rows(rows: pd.DataFrame, meta: dict[str, Any]) -> dict[str, Any]:
    """Per-n and per-strategy statistics; ``meta`` carries beta, the grid and ci_level."""
    beta = float(meta["beta_influence"])
    level = float(meta["ci_level"])
    community = meta["setting"] == "community"
    grid: list[dict[str, Any]] = []
    decay_points: tuple[list[int], list[float]] = ([], [])

    for n in meta["n_grid"]:
        frame = rows[rows["n"] == n]
        per_rep = frame.drop_duplicates("replication")
        failed = per_rep["status"] != "ok"
        entry: dict[str, Any] = {
            "n": int(n),
            "failure_share": float(failed.mean()) if len(per_rep) else 0.0,
            "delta_hat": None,
            "delta_ci": None,
            "bias_bound": None,
            "strategies": {},
        }
        flags = _as_flags(per_rep.loc[~failed, "exact_recovery"])
        if community and flags.size:
            delta = estimate_delta(flags.astype(bool).tolist(), level)
            entry["delta_hat"] = delta.delta_hat
            entry["delta_ci"] = [delta.ci_low, delta.ci_high]
            entry["bias_bound"] = _plug_in_bound(frame, delta.delta_hat, int(meta["width"]))
            decay_points[0].append(int(n))
            decay_points[1].append(delta.delta_hat)
        for strategy in meta["strategies"]:
            entry["strategies"][strategy] = _strategy_summary(
                frame[frame["strategy"] == strategy], beta, level
            )
        grid.append(entry)

    decay = None
    if community:
        try:
            fit = fit_recovery_decay(decay_points[0], decay_points[1], level)
            decay = {
                "slope": fit.slope,
                "slope_ci": list(fit.slope_ci),
                "exponent": fit.exponent,
                "points": fit.points,
            }
        except DomainError as exc:
            logger.info(f"no recovery-decay fit: {exc}")
    return {"meta": meta, "grid": grid, "recovery_decay": decay}


def ensemble_diagnostics(
    outcomes: list[ReplicationOutcome], grid: list[dict[str, Any]]
) -> list[dict[str, Any]]:
    """Covariance identity checks per n over the replications that kept their samples.

    The decomposition is evaluated with the grid's delta-hat as plug-in and, for
    reference, with each cell's in-sample failure share, where it holds exactly.
    """
    entries = []
    for point in grid:
        n = point["n"]
        samples = [o.sample for o in outcomes if o.n == n and o.sample is not None]
        entry: dict[str, Any] = {
            "n": n,
            "replications": len(samples),
            "covariance": None,
            "decomposition": None,
            "decomposition_gap_in_sample": None,
        }
        try:
            entry["covariance"] = lemma2_diagnostic(samples).to_dict()
        except PeerInfluenceError as exc:
            logger.warning(f"no covariance diagnostic at n={n}: {exc}")
        try:
            report = lemma3_diagnostic(samples, delta_hat=point["delta_hat"])
            entry["decomposition"] = report.to_dict()
            entry["decomposition_gap_in_sample"] = lemma3_diagnostic(samples).max_gap
        except PeerInfluenceError as exc:
            logger.warning(f"no decomposition diagnostic at n={n}: {exc}")
        entries.append(entry)
    return entries


def _meta(config: ExperimentConfig) -> dict[str, Any]:
    return {
        "setting": config.setting,
        "beta_influence": config.coeffs.beta_influence,
        "ci_level": config.ci_level,
        "n_grid": list(config.n_grid),
        "replications": config.replications,
        "strategies": [s.value for s in config.strategies],
        "width": config.location_width,
        "seed": config.seed,
    }


def order_rows(rows: pd.DataFrame, strategies: list[str]) -> pd.DataFrame:
    """Deterministic (n, replication, strategy) order regardless of completion order."""
    rank = {name: i for i, name in enumerate(strategies)}
    ordered = rows.assign(_rank=rows["strategy"].map(rank))
    ordered = ordered.sort_values(["n", "replication", "_rank"], kind="mergesort")
    return ordered.drop(columns="_rank").reset_index(drop=True)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    workers = resolve_workers(workers or config.workers)
    total = len(config.n_grid) * config.replications
    logger.info(
        f"experiment: setting={config.setting}, grid={config.n_grid}, "
        f"R={config.replications}, strategies={[s.value for s in config.strategies]}, "
        f"workers={workers}"
    )
    outcomes = _execute(config, workers)

    failures = 0
    for outcome in outcomes:
        status = "failed" if outcome.failed else "ok"
        failures += outcome.failed
        if settings.ENABLE_METRICS:
            REPLICATION_DURATION_SECONDS.labels(config.setting).observe(outcome.duration)
            REPLICATIONS_TOTAL.labels(config.setting, status).inc()

    gamma_columns = [f"gamma0_{j + 1}" for j in range(config.location_width)]
    rows = pd.DataFrame(
        [row for outcome in outcomes for row in outcome.rows],
        columns=ROW_COLUMNS + gamma_columns,
    )
    rows = order_rows(rows, [s.value for s in config.strategies])
    meta = _meta(config)
    failure_rate = failures / total
    warnings = []
    if failure_rate > settings.FAILURE_TOLERANCE:
        message = f"{failures} of {total} replications failed ({failure_rate:.1%})"
        logger.error(message)
        warnings.append(message)
    logger.info(f"experiment finished: {total - failures} of {total} replications succeeded")
    summary = summarize_rows(rows, meta)
    if config.diagnostics:
        summary["diagnostics"] = ensemble_diagnostics(outcomes, summary["grid"])
    return ExperimentResult(
        rows=rows,
        summary=summary,
        failure_rate=failure_rate,
        warnings=warnings,
    )
