"""Network generators and the exact-recovery rate formulas.

Both generators are pure functions of ``(params, n, seed)``; the seed may be an
integer or a ``numpy.random.SeedSequence`` handed down by the experiment harness.
"""

from collections.abc import Callable
from typing import Any

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist, squareform
from scipy.special import expit

from app.core.exceptions import ConfigurationError, DomainError, ParameterValidationError
from app.models.network import AdjacencyMatrix, CommunityAssignment, LatentPositions
from app.schemas.network import LspParams, SbmParams, as_params

Seed = int | np.random.SeedSequence | None


def _coords_normal(rng: np.random.Generator, shape: tuple[int, int], **kw: float) -> np.ndarray:
    return rng.normal(loc=kw.get("loc", 0.0), scale=kw.get("scale", 1.0), size=shape)


def _coords_uniform(rng: np.random.Generator, shape: tuple[int, int], **kw: float) -> np.ndarray:
    return rng.uniform(low=kw.get("low", 0.0), high=kw.get("high", 1.0), size=shape)


COORDINATE_FAMILIES: dict[str, tuple[Callable[..., np.ndarray], frozenset[str]]] = {
    "normal": (_coords_normal, frozenset({"loc", "scale"})),
    "uniform": (_coords_uniform, frozenset({"low", "high"})),
}


def _draw_edges(rng: np.random.Generator, prob: np.ndarray, directed: bool) -> AdjacencyMatrix:
    n = prob.shape[0]
    ties = rng.random((n, n)) < prob
    if directed:
        np.fill_diagonal(ties, False)
    else:
        upper = np.triu(ties, 1)
        ties = upper | upper.T
    return AdjacencyMatrix(ties.astype(np.uint8), directed=directed)


def _check_node_count(n: int) -> None:
    if n < 2:
        raise DomainError(f"a network needs at least 2 nodes, got n={n}")


def sample_sbm(
    params: SbmParams | dict[str, Any], n: int, seed: Seed = None
) -> tuple[AdjacencyMatrix, CommunityAssignment]:
    """Draw block labels i.i.d. from rho, then every dyad independently given the labels."""
    params = as_params(SbmParams, params)
    _check_node_count(n)
    params.gmzz_warnings()
    rng = np.random.default_rng(seed)
    labels = rng.choice(params.k, size=n, p=params.rho_array)
    prob = params.w_array[np.ix_(labels, labels)]
    adjacency = _draw_edges(rng, prob, params.directed)
    logger.debug(
        f"SBM draw: n={n}, k={params.k}, edges={adjacency.edge_count}, "
        f"density={adjacency.density:.4f}"
    )
    return adjacency, CommunityAssignment(labels + 1, params.k)


def sample_coordinates(params: LspParams, n: int, rng: np.random.Generator) -> LatentPositions:
    family = params.dist.family
    if family not in COORDINATE_FAMILIES:
        raise ConfigurationError(
            f"unsupported coordinate distribution '{family}'; "
            f"expected one of {sorted(COORDINATE_FAMILIES)}"
        )
    sampler, allowed = COORDINATE_FAMILIES[family]
    unknown = set(params.dist.params) - allowed
    if unknown:
        raise ConfigurationError(f"unknown parameters for '{family}': {sorted(unknown)}")
    return LatentPositions(sampler(rng, (n, params.d), **params.dist.params))


def link_probability(params: LspParams | dict[str, Any], distances: np.ndarray) -> np.ndarray:
    """logistic(theta_0 - s * distance)."""
    params = as_params(LspParams, params)
    return expit(params.link_intercept - params.link_scale * np.asarray(distances, dtype=float))


def sample_lsp(
    params: LspParams | dict[str, Any], n: int, seed: Seed = None
) -> tuple[AdjacencyMatrix, LatentPositions]:
    """Draw positions i.i.d. from F, then ties with probability decreasing in distance."""
    params = as_params(LspParams, params)
    _check_node_count(n)
    rng = np.random.default_rng(seed)
    positions = sample_coordinates(params, n, rng)
    distances = squareform(pdist(positions.coords))
    adjacency = _draw_edges(rng, link_probability(params, distances), params.directed)
    logger.debug(f"LSP draw: n={n}, d={params.d}, edges={adjacency.edge_count}")
    return adjacency, positions


def dummy_encode(assignment: CommunityAssignment) -> np.ndarray:
    """n x (k-1) indicator matrix; block k is the all-zero baseline row."""
    encoded = np.zeros((assignment.n, assignment.k - 1))
    rows = np.flatnonzero(assignment.sigma < assignment.k)
    encoded[rows, assignment.sigma[rows] - 1] = 1.0
    return encoded


def dummy_decode(matrix: np.ndarray, k: int) -> CommunityAssignment:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[1] != k - 1:
        raise ParameterValidationError(f"expected an n x {k - 1} dummy matrix, got {matrix.shape}")
    if not np.all(np.isin(matrix, (0, 1))) or np.any(matrix.sum(axis=1) > 1):
        raise ParameterValidationError("dummy rows must be 0/1 with at most one 1")
    sigma = np.full(matrix.shape[0], k, dtype=np.int64)
    hot = matrix.sum(axis=1) == 1
    sigma[hot] = np.argmax(matrix[hot], axis=1) + 1
    return CommunityAssignment(sigma, k)


def expected_edge_count(params: SbmParams | dict[str, Any], n: int) -> float:
    params = as_params(SbmParams, params)
    rho = params.rho_array
    pairs = n * (n - 1) if params.directed else n * (n - 1) / 2
    return float(pairs * rho @ params.w_array @ rho)


def expected_degree(params: SbmParams | dict[str, Any], n: int, block: int) -> float:
    """Expected (in-)degree of a node in ``block`` (1-based)."""
    params = as_params(SbmParams, params)
    if not 1 <= block <= params.k:
        raise DomainError(f"block must lie in 1..{params.k}, got {block}")
    return float((n - 1) * params.w_array[block - 1] @ params.rho_array)


def gmzz_report(params: SbmParams | dict[str, Any]) -> list[str]:
    """Validate hard GMZZ conditions (raising) and return the soft findings."""
    return as_params(SbmParams, params).gmzz_warnings()


def renyi_half_bernoulli(p: float, q: float) -> float:
    """Renyi divergence of order 1/2 between Bernoulli(p) and Bernoulli(q)."""
    for name, value in (("p", p), ("q", q)):
        if not 0.0 < value < 1.0:
            raise DomainError(f"{name} must lie in (0, 1), got {value}")
    if p == q:
        return 0.0
    affinity = np.sqrt(p * q) + np.sqrt((1.0 - p) * (1.0 - q))
    return max(0.0, float(-2.0 * np.log(affinity)))


def minimax_rate(
    n: int, k: int, a_over_n: float, b_over_n: float, beta_balance: float = 1.0
) -> float:
    """Leading exponent of the minimax misclassification proportion.

    The (1 + o(1)) factor is dropped, so this is an order-of-magnitude prediction.
    """
    if not 0.0 < b_over_n < a_over_n < 1.0:
        raise DomainError(f"need 0 < b/n < a/n < 1, got b/n={b_over_n}, a/n={a_over_n}")
    if k < 2:
        raise DomainError(f"rates need k >= 2, got k={k}")
    if beta_balance < 1.0:
        raise DomainError(f"beta_balance must be >= 1, got {beta_balance}")
    divergence = renyi_half_bernoulli(a_over_n, b_over_n)
    denominator = 2.0 if k == 2 else beta_balance * k
    return float(np.exp(-n * divergence / denominator))


def any_error_probability_bound(n: int, c: float) -> float:
    """Markov bound n * exp(-c n) on the probability of at least one misclassified node."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not c > 0.0:
        raise DomainError(f"c must be positive, got {c}")
    if np.isinf(c):
        return 0.0
    return float(n * np.exp(-c * n))
