"""End-to-end Monte Carlo runs through the replication pool."""

from collections.abc import Callable
from typing import Any

import numpy as np
import pandas as pd
import pytest

from app.core.config.settings import settings
from app.models.experiment import ExperimentResult
from app.schemas.experiment import ExperimentConfig
from app.schemas.network import SbmParams
from app.services.behavior import simulate_panel
from app.services.bias_bound import worst_case_bias_bound
from app.services.experiment import (
    _plug_in_bound,
    resolve_workers,
    run_experiment,
    summarize_rows,
)
from app.services.inference import estimate_influence
from app.services.netgen import dummy_encode, sample_sbm
from app.tasks.replication import replication_seed, run_replication

pytestmark = pytest.mark.integration

ConfigFactory = Callable[..., ExperimentConfig]

UNSTABLE = {"beta_influence": 10.0, "gamma1": [1.0]}


def test_rows_cover_the_grid(community_config: ConfigFactory) -> None:
    result = run_experiment(community_config())
    assert len(result.rows) == 2 * 3 * 3
    assert result.failure_rate == 0.0
    assert result.rows["strategy"].tolist()[:3] == ["naive", "oracle", "proxy"]
    assert result.rows["n"].is_monotonic_increasing
    assert "gamma0_1" in result.rows.columns
    assert result.rows.loc[result.rows["strategy"] == "naive", "gamma0_1"].isna().all()
    assert [entry["n"] for entry in result.summary["grid"]] == [30, 40]


def test_experiment_is_deterministic(community_config: ConfigFactory) -> None:
    first = run_experiment(community_config())
    second = run_experiment(community_config())
    pd.testing.assert_frame_equal(first.rows, second.rows)
    assert first.summary == second.summary


def test_seed_changes_the_draws(community_config: ConfigFactory) -> None:
    first = run_experiment(community_config(seed=1))
    second = run_experiment(community_config(seed=2))
    assert not np.array_equal(first.rows["beta_hat"], second.rows["beta_hat"])


def test_parallel_run_matches_sequential(community_config: ConfigFactory) -> None:
    sequential = run_experiment(community_config(), workers=1)
    parallel = run_experiment(community_config(), workers=2)
    pd.testing.assert_frame_equal(sequential.rows, parallel.rows)
    assert sequential.summary == parallel.summary


def test_replications_are_addressable(community_config: ConfigFactory) -> None:
    config = community_config()
    result = run_experiment(config)
    single = pd.DataFrame(run_replication(config, 40, 1).rows)
    stored = result.rows[(result.rows["n"] == 40) & (result.rows["replication"] == 1)]
    assert single["beta_hat"].tolist() == stored["beta_hat"].tolist()


def test_replication_seeds_differ_by_cell() -> None:
    draws = {
        (n, rep): replication_seed(5, n, rep).generate_state(2).tolist()
        for n in (50, 100)
        for rep in range(3)
    }
    assert len({tuple(state) for state in draws.values()}) == 6


def test_true_labels_as_proxy_match_the_oracle(community_config: ConfigFactory) -> None:
    result = run_experiment(community_config(inject_truth_as_proxy=True))
    rows = result.rows
    oracle = rows[rows["strategy"] == "oracle"]["beta_hat"].to_numpy()
    proxy = rows[rows["strategy"] == "proxy"]["beta_hat"].to_numpy()
    assert np.array_equal(oracle, proxy)
    for entry in result.summary["grid"]:
        assert entry["delta_hat"] == 0.0


def test_label_noise_drives_failure_share(community_config: ConfigFactory) -> None:
    result = run_experiment(community_config(label_noise=0.2))
    for entry in result.summary["grid"]:
        assert entry["delta_hat"] == 1.0
        assert entry["bias_bound"] is not None
        assert entry["bias_bound"] > 0.0
    assert (result.rows["recovery_error"] == 0.2).all()


def test_summary_is_recomputable(community_config: ConfigFactory) -> None:
    result = run_experiment(community_config())
    assert summarize_rows(result.rows, result.summary["meta"]) == result.summary


def test_unstable_dynamics_fail_every_replication(community_config: ConfigFactory) -> None:
    config = community_config(coeffs=UNSTABLE, T=20, replications=2)
    result = run_experiment(config)
    assert result.failure_rate == 1.0
    assert result.warnings
    assert (result.rows["status"] == "failed").all()
    assert result.rows["error"].str.contains("overflow|diverge", case=False).all()
    for entry in result.summary["grid"]:
        assert entry["failure_share"] == 1.0
        assert entry["strategies"]["naive"]["count"] == 0
        assert entry["strategies"]["naive"]["mean_beta_hat"] is None
    assert result.summary["recovery_decay"] is None


def test_continuous_setting_runs(continuous_config: ExperimentConfig) -> None:
    result = run_experiment(continuous_config)
    assert len(result.rows) == 2 * 2 * 2
    assert result.failure_rate == 0.0
    assert np.isfinite(result.rows["recovery_error"]).all()
    assert result.rows["exact_recovery"].isna().all()
    for entry in result.summary["grid"]:
        assert entry["delta_hat"] is None
        assert entry["strategies"]["proxy"]["median_recovery_error"] > 0.0
    assert result.summary["recovery_decay"] is None


def test_worker_cap(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(settings, "MAX_WORKERS", 2)
    assert resolve_workers(8) == 2
    assert resolve_workers(None) == 1
    monkeypatch.setattr(settings, "MAX_WORKERS", None)
    assert resolve_workers(8) == 8


def test_diagnostics_land_in_the_summary(community_config: ConfigFactory) -> None:
    config = community_config(
        n_grid=[30],
        replications=4,
        strategies=["oracle", "proxy"],
        label_noise=0.1,
        diagnostics=True,
    )
    result = run_experiment(config)
    (entry,) = result.summary["diagnostics"]
    assert entry["n"] == 30
    assert entry["replications"] == 4
    assert entry["covariance"]["strata"] or entry["covariance"]["excluded_cells"]
    assert len(entry["covariance"]["gamma0"]) == 1
    # Every replication misses exact recovery, so the plug-in share is the in-sample one
    assert entry["decomposition"]["delta_hat"] == 1.0
    assert entry["decomposition"]["max_gap"] == pytest.approx(0.0, abs=1e-12)
    assert entry["decomposition_gap_in_sample"] == pytest.approx(0.0, abs=1e-12)
    assert "diagnostics" not in summarize_rows(result.rows, result.summary["meta"])


def test_diagnostics_are_off_by_default(community_config: ConfigFactory) -> None:
    result = run_experiment(community_config(replications=2))
    assert "diagnostics" not in result.summary


def _bound_rows(proxy_gamma: list[float], oracle_gamma: list[float]) -> pd.DataFrame:
    records = [("proxy", g) for g in proxy_gamma] + [("oracle", g) for g in oracle_gamma]
    return pd.DataFrame(
        {
            "strategy": [strategy for strategy, _ in records],
            "status": "ok",
            "gamma0_1": [gamma for _, gamma in records],
            "mean_in_degree": 5.0,
            "partial_variance": 2.0,
        }
    )


def test_plug_in_bound_skips_missing_loadings() -> None:
    expected = worst_case_bias_bound(np.array([3.0]), 0.2, 5.0, 2.0)
    assert expected > 0.0
    partial = _bound_rows([3.0, 3.0, np.nan, 3.0], [])
    assert _plug_in_bound(partial, 0.2, 1) == pytest.approx(expected)
    # No finite proxy loading at all: fall through to the oracle fit
    fallback = _bound_rows([np.nan, np.nan], [3.0, 3.0])
    assert _plug_in_bound(fallback, 0.2, 1) == pytest.approx(expected)


def test_zero_loading_leaves_behavior_independent_of_blocks() -> None:
    params = SbmParams(k=2, rho=[0.5, 0.5], W=[[0.3, 0.05], [0.05, 0.3]])
    for rep in range(20):
        adjacency, sigma = sample_sbm(params, 80, seed=rep)
        locations = dummy_encode(sigma)
        panel = simulate_panel(adjacency, locations, {"gamma1": [0.0]}, T=1, seed=100 + rep)
        fit = estimate_influence(panel, adjacency, "oracle", locations)
        index = fit.column_names.index("ctrl_1")
        assert abs(fit.coeffs[index] / fit.std_errors[index]) < 4.0


def _by_strategy(result: ExperimentResult, n: int) -> dict[str, dict[str, Any]]:
    (entry,) = [point for point in result.summary["grid"] if point["n"] == n]
    strategies: dict[str, dict[str, Any]] = entry["strategies"]
    return strategies


@pytest.mark.slow
def test_naive_is_confounded_and_oracle_is_not(community_config: ConfigFactory) -> None:
    config = community_config(
        sbm={"k": 2, "rho": [0.5, 0.5], "W": [[0.1, 0.01], [0.01, 0.1]]},
        n_grid=[200],
        replications=100,
        strategies=["naive", "oracle"],
        inject_truth_as_proxy=True,
    )
    stats = _by_strategy(run_experiment(config, workers=4), 200)
    naive, oracle = stats["naive"], stats["oracle"]
    assert naive["count"] == oracle["count"] == 100
    assert naive["bias"] > 5.0 * naive["mc_se"]
    assert abs(oracle["bias"]) <= 4.0 * oracle["mc_se"]


@pytest.mark.slow
def test_noisy_proxy_sits_between_naive_and_oracle(community_config: ConfigFactory) -> None:
    config = community_config(n_grid=[150], replications=60, label_noise=0.1)
    stats = _by_strategy(run_experiment(config, workers=4), 150)
    naive, oracle, proxy = stats["naive"], stats["oracle"], stats["proxy"]
    assert naive["abs_bias"] > proxy["abs_bias"] > oracle["abs_bias"]
    assert oracle["abs_bias"] <= 4.0 * oracle["mc_se"]
    assert proxy["bias"] > 4.0 * proxy["mc_se"]


@pytest.mark.slow
def test_proxy_approaches_the_oracle_as_n_grows(community_config: ConfigFactory) -> None:
    config = community_config(
        sbm={"k": 2, "rho": [0.5, 0.5], "W": [[0.3, 0.05], [0.05, 0.3]]},
        n_grid=[40, 200],
        replications=30,
        strategies=["oracle", "proxy"],
    )
    result = run_experiment(config, workers=4)
    small, large = result.summary["grid"]
    assert large["delta_hat"] < small["delta_hat"]

    ok = result.rows[result.rows["status"] == "ok"]
    paired = ok.pivot_table(index=["n", "replication"], columns="strategy", values="beta_hat")
    gap = (paired["proxy"] - paired["oracle"]).abs().groupby(level="n").mean()
    assert gap[200] < gap[40]


@pytest.fixture(scope="module")
def quadratic_run() -> ExperimentResult:
    """Continuous setting whose nodal effect carries a quadratic term in the location."""
    config = ExperimentConfig.model_validate(
        {
            "setting": "continuous",
            "lsp": {"d": 2, "link_intercept": 1.0, "link_scale": 1.0},
            "coeffs": {"gamma1": [1.0, -1.0], "gamma1_quadratic": [0.5, 0.5]},
            "embedding": {"method": "lbfgs", "n_restarts": 3},
            "n_grid": [40, 160],
            "replications": 20,
            "strategies": ["proxy", "additive"],
            "seed": 23,
        }
    )
    return run_experiment(config, workers=4)


@pytest.mark.slow
def test_additive_controls_absorb_a_quadratic_loading(quadratic_run: ExperimentResult) -> None:
    stats = _by_strategy(quadratic_run, 160)
    proxy, additive = stats["proxy"], stats["additive"]
    assert proxy["abs_bias"] > 4.0 * proxy["mc_se"]
    assert additive["abs_bias"] < proxy["abs_bias"]


@pytest.mark.slow
def test_embedding_error_shrinks_with_n(quadratic_run: ExperimentResult) -> None:
    errors = [
        point["strategies"]["proxy"]["median_recovery_error"]
        for point in quadratic_run.summary["grid"]
    ]
    assert errors[-1] < errors[0]
