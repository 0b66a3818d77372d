"""Tests for network generators and rate formulas."""

from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.special import expit

from app.core.exceptions import ConfigurationError, DomainError, ParameterValidationError
from app.models.network import AdjacencyMatrix, CommunityAssignment
from app.schemas.network import LspParams, SbmParams
from app.services.netgen import (
    any_error_probability_bound,
    dummy_decode,
    dummy_encode,
    expected_degree,
    expected_edge_count,
    gmzz_report,
    link_probability,
    minimax_rate,
    renyi_half_bernoulli,
    sample_lsp,
    sample_sbm,
)

getcontext().prec = 60


pytestmark = pytest.mark.unit


def _renyi_oracle(p: float, q: float) -> float:
    dp, dq = Decimal(p), Decimal(q)
    affinity = (dp * dq).sqrt() + ((1 - dp) * (1 - dq)).sqrt()
    return float(-2 * affinity.ln())


def test_identity_affinity_gives_disjoint_cliques() -> None:
    params = {"k": 2, "rho": [0.5, 0.5], "W": [[1.0, 0.0], [0.0, 1.0]]}
    adjacency, sigma = sample_sbm(params, 6, seed=3)
    same = sigma.sigma[:, None] == sigma.sigma[None, :]
    np.fill_diagonal(same, False)
    assert np.array_equal(adjacency.edges.astype(bool), same)


def test_zero_affinity_gives_empty_graph() -> None:
    adjacency, sigma = sample_sbm({"k": 1, "rho": [1.0], "W": [[0.0]]}, 25, seed=0)
    assert adjacency.edge_count == 0
    assert np.all(sigma.sigma == 1)


def test_sbm_density_matches_expectation(two_block_params: SbmParams) -> None:
    n, reps = 200, 300
    densities = np.array(
        [sample_sbm(two_block_params, n, seed=s)[0].density for s in range(reps)]
    )
    expected = expected_edge_count(two_block_params, n) / (n * (n - 1) / 2)
    assert expected == pytest.approx(0.3)
    se = densities.std(ddof=1) / np.sqrt(reps)
    assert abs(densities.mean() - expected) < 3 * se


def test_sbm_expected_degree_per_block(two_block_params: SbmParams) -> None:
    n, reps = 100, 200
    means = []
    for seed in range(reps):
        adjacency, sigma = sample_sbm(two_block_params, n, seed=seed)
        means.append(adjacency.in_degrees()[sigma.sigma == 1].mean())
    means = np.array(means)
    expected = expected_degree(two_block_params, n, 1)
    assert expected == pytest.approx(99 * 0.3)
    assert abs(means.mean() - expected) < 4 * means.std(ddof=1) / np.sqrt(reps)


def test_expected_degree_rejects_unknown_block(two_block_params: SbmParams) -> None:
    with pytest.raises(DomainError):
        expected_degree(two_block_params, 10, 3)


def test_dyads_are_conditionally_independent() -> None:
    params = {"k": 1, "rho": [1.0], "W": [[0.3]]}
    reps = 2000
    draws = np.array(
        [sample_sbm(params, 4, seed=s)[0].edges[[0, 2], [1, 3]] for s in range(reps)], dtype=float
    )
    r = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
    assert abs(r) < 4 / np.sqrt(reps)


def test_sbm_is_deterministic_given_seed(two_block_params: SbmParams) -> None:
    first, sigma_a = sample_sbm(two_block_params, 50, seed=42)
    second, sigma_b = sample_sbm(two_block_params, 50, seed=np.random.SeedSequence(42))
    assert np.array_equal(first.edges, second.edges)
    assert np.array_equal(sigma_a.sigma, sigma_b.sigma)


def test_sbm_directed_option() -> None:
    params = {"k": 2, "rho": [0.5, 0.5], "W": [[0.6, 0.2], [0.0, 0.6]], "directed": True}
    adjacency, _ = sample_sbm(params, 40, seed=1)
    assert adjacency.directed
    assert not np.array_equal(adjacency.edges, adjacency.edges.T)
    assert np.all(np.diag(adjacency.edges) == 0)


def test_sbm_rejects_small_n(two_block_params: SbmParams) -> None:
    with pytest.raises(DomainError):
        sample_sbm(two_block_params, 1, seed=0)


@pytest.mark.parametrize(
    "raw",
    [
        {"k": 2, "rho": [0.6, 0.6], "W": [[0.5, 0.1], [0.1, 0.5]]},
        {"k": 2, "rho": [0.5, 0.5], "W": [[0.5, 0.2], [0.1, 0.5]]},
        {"k": 2, "rho": [0.5, 0.5], "W": [[1.5, 0.1], [0.1, 0.5]]},
        {"k": 2, "rho": [1.0], "W": [[0.5, 0.1], [0.1, 0.5]]},
    ],
)
def test_invalid_sbm_params(raw: dict) -> None:
    with pytest.raises(ParameterValidationError):
        sample_sbm(raw, 10, seed=0)


def test_gmzz_strict_form_has_no_findings() -> None:
    params = {
        "k": 2,
        "rho": [0.5, 0.5],
        "W": [[0.5, 0.1], [0.1, 0.5]],
        "gmzz": {"a_over_n": 0.4, "b_over_n": 0.2, "alpha_density": 2.0},
    }
    assert gmzz_report(params) == []


def test_gmzz_averaged_form_only_warns() -> None:
    params = {
        "k": 2,
        "rho": [0.5, 0.5],
        "W": [[0.5, 0.1], [0.1, 0.3]],
        "gmzz": {"a_over_n": 0.35, "b_over_n": 0.2, "alpha_density": 2.0},
    }
    findings = gmzz_report(params)
    assert len(findings) == 1
    assert "averaged" in findings[0]


def test_gmzz_violating_both_forms_is_an_error() -> None:
    params = {
        "k": 2,
        "rho": [0.5, 0.5],
        "W": [[0.5, 0.1], [0.1, 0.3]],
        "gmzz": {"a_over_n": 0.45, "b_over_n": 0.2},
    }
    with pytest.raises(ParameterValidationError):
        gmzz_report(params)


def test_gmzz_singular_value_floor() -> None:
    params = {
        "k": 2,
        "rho": [0.5, 0.5],
        "W": [[0.5, 0.1], [0.1, 0.5]],
        "gmzz": {"a_over_n": 0.4, "b_over_n": 0.2, "lambda_sv": 0.5},
    }
    with pytest.raises(ParameterValidationError):
        gmzz_report(params)


@pytest.mark.parametrize("intercept,complete", [(30.0, True), (-30.0, False)])
def test_lsp_saturating_links(intercept: float, complete: bool) -> None:
    params = {"d": 2, "link_intercept": intercept, "link_scale": 1.0}
    adjacency, positions = sample_lsp(params, 10, seed=5)
    assert positions.coords.shape == (10, 2)
    assert adjacency.edge_count == (45 if complete else 0)


def test_lsp_ties_follow_logistic_curve() -> None:
    params = LspParams(d=2, link_intercept=1.0, link_scale=1.0)
    adjacency, positions = sample_lsp(params, 500, seed=9)
    distances = pdist(positions.coords)
    rows, cols = np.triu_indices(500, 1)
    ties = adjacency.edges[rows, cols].astype(float)
    prob = link_probability(params, distances)
    edges = np.quantile(distances, np.linspace(0, 1, 11))
    bins = np.clip(np.digitize(distances, edges[1:-1]), 0, 9)
    for b in range(10):
        mask = bins == b
        expected = prob[mask].mean()
        se = np.sqrt(np.sum(prob[mask] * (1 - prob[mask]))) / mask.sum()
        assert abs(ties[mask].mean() - expected) < 4 * se


def test_link_probability_is_logistic() -> None:
    params = {"d": 1, "link_intercept": 0.5, "link_scale": 2.0}
    assert link_probability(params, np.array([0.0, 1.0])) == pytest.approx(
        expit(np.array([0.5, -1.5]))
    )


def test_lsp_uniform_family() -> None:
    params = {
        "d": 3,
        "dist": {"family": "uniform", "params": {"low": -1.0, "high": 1.0}},
        "link_intercept": 0.0,
    }
    _, positions = sample_lsp(params, 50, seed=2)
    assert positions.coords.min() >= -1.0
    assert positions.coords.max() < 1.0


def test_lsp_unknown_family_is_configuration_error() -> None:
    params = {"d": 2, "dist": {"family": "cauchy"}, "link_intercept": 1.0}
    with pytest.raises(ConfigurationError):
        sample_lsp(params, 10, seed=0)


def test_lsp_rejects_nonpositive_scale() -> None:
    with pytest.raises(ParameterValidationError):
        LspParams(d=2, link_intercept=1.0, link_scale=0.0)


def test_dummy_encode_examples() -> None:
    two = dummy_encode(CommunityAssignment(np.array([1, 2, 2]), 2))
    assert np.array_equal(two, [[1.0], [0.0], [0.0]])
    three = dummy_encode(CommunityAssignment(np.array([3, 1, 2]), 3))
    assert np.array_equal(three, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_dummy_decode_inverts_encode() -> None:
    sigma = CommunityAssignment(np.random.default_rng(0).integers(1, 5, size=40), 4)
    encoded = dummy_encode(sigma)
    assert encoded.shape == (40, 3)
    assert np.all(encoded.sum(axis=1) <= 1)
    assert np.array_equal(dummy_decode(encoded, 4).sigma, sigma.sigma)


def test_dummy_decode_rejects_two_hot_rows() -> None:
    with pytest.raises(ParameterValidationError):
        dummy_decode(np.array([[1.0, 1.0]]), 3)


def test_renyi_identical_and_symmetric() -> None:
    assert renyi_half_bernoulli(0.3, 0.3) == 0.0
    assert renyi_half_bernoulli(0.2, 0.8) == pytest.approx(renyi_half_bernoulli(0.8, 0.2))


def test_renyi_matches_high_precision_oracle() -> None:
    assert abs(renyi_half_bernoulli(0.3, 0.1) - _renyi_oracle(0.3, 0.1)) < 1e-12


def test_renyi_is_positive_off_diagonal() -> None:
    grid = np.linspace(0.05, 0.95, 10)
    for p in grid:
        for q in grid:
            value = renyi_half_bernoulli(p, q)
            assert value >= 0.0
            assert (value == 0.0) == (p == q)


@pytest.mark.parametrize("p,q", [(0.0, 0.5), (0.5, 1.0), (-0.1, 0.2)])
def test_renyi_domain(p: float, q: float) -> None:
    with pytest.raises(DomainError):
        renyi_half_bernoulli(p, q)


def test_minimax_rate_two_blocks() -> None:
    divergence = _renyi_oracle(0.5, 0.1)
    assert minimax_rate(100, 2, 0.5, 0.1) == pytest.approx(np.exp(-50 * divergence), rel=1e-12)
    assert minimax_rate(200, 2, 0.5, 0.1) == pytest.approx(
        minimax_rate(100, 2, 0.5, 0.1) ** 2, rel=1e-12
    )


def test_minimax_rate_many_blocks_uses_balance() -> None:
    divergence = renyi_half_bernoulli(0.4, 0.1)
    assert minimax_rate(60, 3, 0.4, 0.1, beta_balance=1.5) == pytest.approx(
        np.exp(-60 * divergence / 4.5)
    )


def test_minimax_rate_domain() -> None:
    with pytest.raises(DomainError):
        minimax_rate(100, 2, 0.1, 0.1)
    with pytest.raises(DomainError):
        minimax_rate(100, 1, 0.5, 0.1)


def test_any_error_bound_matches_direct_evaluation() -> None:
    oracle = float(Decimal(10) * (Decimal(-10)).exp())
    assert any_error_probability_bound(10, 1.0) == pytest.approx(oracle, rel=1e-14)


def test_any_error_bound_limits() -> None:
    values = [any_error_probability_bound(5, c) for c in (0.1, 0.5, 1.0, 2.0)]
    assert values == sorted(values, reverse=True)
    assert any_error_probability_bound(1, float("inf")) == 0.0
    assert any_error_probability_bound(2000, 0.1) < 1e-80
    with pytest.raises(DomainError):
        any_error_probability_bound(10, 0.0)


def test_adjacency_invariants() -> None:
    with pytest.raises(ParameterValidationError):
        AdjacencyMatrix(np.array([[1, 0], [0, 0]]))
    with pytest.raises(ParameterValidationError):
        AdjacencyMatrix(np.array([[0, 1], [0, 0]]))
    assert AdjacencyMatrix(np.array([[0, 1], [0, 0]]), directed=True).edge_count == 1
