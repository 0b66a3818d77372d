"""Block recovery: spectral initialization, k-means, profile-likelihood refinement.

Labels are 1-based throughout. The Bernoulli profile likelihood uses Laplace-smoothed
block densities p_ab = (m_ab + 1) / (N_ab + 2), where m_ab counts ties and N_ab counts
dyads between blocks a and b (unordered pairs with a <= b when undirected).
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from loguru import logger
from scipy import stats
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.core.config.settings import settings
from app.core.exceptions import DegenerateClusteringError, DomainError, ShapeError
from app.models.communities import DecayFit, DeltaEstimate, DetectionResult
from app.models.network import AdjacencyMatrix, CommunityAssignment
from app.schemas.network import as_params
from app.schemas.options import DetectionOptions

EXHAUSTIVE_CHUNK = 8192
LL_TOL = 1e-12


def _cell_counts(
    counts: np.ndarray, sizes: np.ndarray, directed: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Ties and dyads per block cell; leading axes of ``counts``/``sizes`` are batch axes."""
    k = sizes.shape[-1]
    eye = np.eye(k, dtype=bool)
    pairs = sizes[..., :, None] * sizes[..., None, :]
    pairs = pairs - np.where(eye, sizes[..., None, :], 0.0)
    if directed:
        return counts, pairs
    keep = np.triu(np.ones((k, k))) * np.where(eye, 0.5, 1.0)
    return counts * keep, pairs * keep


def _smoothed_log_likelihood(counts: np.ndarray, sizes: np.ndarray, directed: bool) -> np.ndarray:
    ties, pairs = _cell_counts(counts, sizes, directed)
    p = (ties + 1.0) / (pairs + 2.0)
    cells = ties * np.log(p) + (pairs - ties) * np.log1p(-p)
    return cells.sum(axis=(-2, -1))


def _block_counts(edges: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    onehot = np.eye(k)[labels]
    return onehot.T @ edges @ onehot, onehot.sum(axis=0)


def profile_log_likelihood(adjacency: AdjacencyMatrix, assignment: CommunityAssignment) -> float:
    """Laplace-smoothed Bernoulli profile log-likelihood of ``assignment``."""
    if assignment.n != adjacency.n:
        raise ShapeError(f"assignment has {assignment.n} nodes, adjacency has {adjacency.n}")
    counts, sizes = _block_counts(adjacency.as_float(), assignment.zero_based, assignment.k)
    return float(_smoothed_log_likelihood(counts, sizes, adjacency.directed))


def leading_eigenpairs(
    matrix: np.ndarray, k: int, tol: float, max_iter: int, seed: int
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Top-k eigenpairs by magnitude of a symmetric matrix via power iteration and deflation.

    Returns (values, n x k vectors, all_converged).
    """
    n = matrix.shape[0]
    rng = np.random.default_rng(seed)
    values = np.zeros(k)
    vectors = np.zeros((n, k))
    deflated = matrix.copy()
    all_converged = True
    for j in range(k):
        x = rng.standard_normal(n)
        x -= vectors[:, :j] @ (vectors[:, :j].T @ x)
        x /= np.linalg.norm(x)
        converged = False
        for _ in range(max_iter):
            y = deflated @ x
            y -= vectors[:, :j] @ (vectors[:, :j].T @ y)
            norm = np.linalg.norm(y)
            if norm == 0.0:
                converged = True
                break
            y /= norm
            if min(np.linalg.norm(y - x), np.linalg.norm(y + x)) < tol:
                x = y
                converged = True
                break
            x = y
        if not converged:
            all_converged = False
            logger.warning(f"eigenvector {j + 1} of {k} did not converge in {max_iter} iterations")
        values[j] = float(x @ deflated @ x)
        vectors[:, j] = x
        deflated -= values[j] * np.outer(x, x)
    return values, vectors, all_converged


def _spectral_matrix(adjacency: AdjacencyMatrix, regularize: bool) -> np.ndarray:
    edges = adjacency.as_float()
    if adjacency.directed:
        edges = (edges + edges.T) / 2.0
    if regularize:
        edges = edges + edges.sum(axis=1).mean() / adjacency.n
    return edges


def _cluster_rows(rows: np.ndarray, k: int, n_restarts: int, seed: int) -> np.ndarray:
    model = KMeans(n_clusters=k, init="k-means++", n_init=n_restarts, random_state=seed)
    labels = model.fit_predict(rows)
    found = np.unique(labels).size
    if found < k:
        raise DegenerateClusteringError(f"k-means produced {found} nonempty clusters, need {k}")
    return labels


def spectral_init(
    adjacency: AdjacencyMatrix, k: int, opts: DetectionOptions
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-based labels from k-means on the leading eigenvectors, and their eigenvalues."""
    max_iter = opts.eig_max_iter or 10 * adjacency.n
    values, vectors, _ = leading_eigenpairs(
        _spectral_matrix(adjacency, opts.regularize), k, opts.eig_tol, max_iter, opts.seed
    )
    retrying = Retrying(
        stop=stop_after_attempt(opts.max_attempts),
        retry=retry_if_exception_type(DegenerateClusteringError),
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            number = attempt.retry_state.attempt_number
            if number > 1:
                logger.info(f"k-means attempt {number} of {opts.max_attempts}")
            state = int(np.random.SeedSequence([opts.seed, number]).generate_state(1)[0])
            labels = _cluster_rows(vectors, k, opts.n_restarts, state)
    return labels, values


def refine_labels(
    adjacency: AdjacencyMatrix, labels: np.ndarray, k: int, max_sweeps: int
) -> tuple[np.ndarray, float, int, bool]:
    """Greedy node-wise moves in index order while the profile likelihood strictly increases.

    Returns (labels, log_likelihood, sweeps, converged).
    """
    edges = adjacency.as_float()
    labels = labels.copy()
    onehot = np.eye(k)[labels]
    counts = onehot.T @ edges @ onehot
    sizes = onehot.sum(axis=0)
    current = float(_smoothed_log_likelihood(counts, sizes, adjacency.directed))
    shifts = np.eye(k)

    for sweep in range(1, max_sweeps + 1):
        moved = False
        for i in range(adjacency.n):
            a = labels[i]
            out_ties = edges[i] @ onehot
            in_ties = edges[:, i] @ onehot
            delta = shifts - shifts[a]
            candidate_counts = (
                counts
                + delta[:, :, None] * out_ties[None, None, :]
                + in_ties[None, :, None] * delta[:, None, :]
            )
            candidate_sizes = sizes + delta
            scores = _smoothed_log_likelihood(candidate_counts, candidate_sizes, adjacency.directed)
            scores[a] = -np.inf
            b = int(np.argmax(scores))
            if scores[b] > current + LL_TOL:
                labels[i] = b
                onehot[i] = shifts[b]
                counts = candidate_counts[b]
                sizes = candidate_sizes[b]
                current = float(scores[b])
                moved = True
        if not moved:
            return labels, current, sweep, True

    return labels, current, max_sweeps, max_sweeps == 0


def exhaustive_labels(adjacency: AdjacencyMatrix, k: int) -> tuple[np.ndarray, float]:
    """Global profile-likelihood maximizer over all k**n labelings (first one on ties)."""
    n = adjacency.n
    edges = adjacency.as_float()
    place = k ** np.arange(n - 1, -1, -1)
    best_labels = np.zeros(n, dtype=np.int64)
    best = -np.inf
    total = k**n
    for start in range(0, total, EXHAUSTIVE_CHUNK):
        index = np.arange(start, min(start + EXHAUSTIVE_CHUNK, total))
        batch = (index[:, None] // place[None, :]) % k
        onehot = np.eye(k)[batch]
        counts = np.einsum("lia,ij,ljb->lab", onehot, edges, onehot, optimize=True)
        scores = _smoothed_log_likelihood(counts, onehot.sum(axis=1), adjacency.directed)
        top = int(np.argmax(scores))
        if scores[top] > best:
            best = float(scores[top])
            best_labels = batch[top].astype(np.int64)
    return best_labels, best


def bulk_edge(adjacency: AdjacencyMatrix) -> float:
    """Spectral edge 2 * sqrt(n p (1 - p)) of a structureless graph with the same density."""
    p = adjacency.density
    return float(2.0 * np.sqrt(adjacency.n * p * (1.0 - p)))


def align_labels(
    sigma_hat: CommunityAssignment, sigma_true: CommunityAssignment
) -> tuple[np.ndarray, float]:
    """Label permutation minimizing disagreements, and the resulting error proportion.

    ``permutation[a - 1]`` is the true label matched to estimated label a.
    """
    if sigma_hat.n != sigma_true.n or sigma_hat.k != sigma_true.k:
        raise ShapeError(
            f"cannot align n={sigma_hat.n}, k={sigma_hat.k} against "
            f"n={sigma_true.n}, k={sigma_true.k}"
        )
    k = sigma_true.k
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (sigma_hat.zero_based, sigma_true.zero_based), 1)
    rows, cols = linear_sum_assignment(-confusion)
    permutation = np.empty(k, dtype=np.int64)
    permutation[rows] = cols + 1
    agreements = int(confusion[rows, cols].sum())
    rate = (sigma_true.n - agreements) / sigma_true.n if sigma_true.n else 0.0
    return permutation, float(rate)


def detect_communities(
    adjacency: AdjacencyMatrix,
    k: int,
    opts: DetectionOptions | dict[str, Any] | None = None,
    sigma_true: CommunityAssignment | None = None,
) -> DetectionResult:
    opts = as_params(DetectionOptions, opts or {})
    n = adjacency.n
    if n < 1:
        raise DomainError("adjacency matrix is empty")
    if k < 2:
        raise DomainError(f"detection needs k >= 2, got k={k}")
    if k > n:
        raise DomainError(f"cannot split {n} nodes into k={k} blocks")

    labels, values = spectral_init(adjacency, k, opts)
    labels, ll, sweeps, converged = refine_labels(adjacency, labels, k, opts.max_sweeps)
    warnings: list[str] = []
    if not converged:
        message = f"refinement hit the sweep cap ({opts.max_sweeps}) with nodes still moving"
        logger.warning(message)
        warnings.append(message)

    exhaustive = k**n <= opts.exhaustive_limit
    if exhaustive:
        best_labels, best = exhaustive_labels(adjacency, k)
        if best > ll + LL_TOL:
            labels, ll = best_labels, best

    edge = bulk_edge(adjacency)
    signal = abs(values[k - 1])
    ratio = signal / edge if edge > 0 else (np.inf if signal > 0 else 0.0)
    identifiable = bool(ratio > 1.0 + opts.identifiability_margin)
    if not identifiable:
        message = (
            f"k-th eigenvalue {signal:.4g} does not clear the bulk edge {edge:.4g}; "
            "blocks may not be identifiable"
        )
        logger.warning(message)
        warnings.append(message)

    sigma_hat = CommunityAssignment(labels + 1, k)
    aligned: dict[str, Any] = {}
    if sigma_true is not None:
        permutation, rate = align_labels(sigma_hat, sigma_true)
        aligned = {
            "misclassification_rate": rate,
            "exact_recovery": bool(rate == 0.0),
            "permutation": permutation,
        }
    logger.debug(f"detection: n={n}, k={k}, ll={ll:.6g}, sweeps={sweeps}, exhaustive={exhaustive}")
    return DetectionResult(
        sigma_hat=sigma_hat,
        log_likelihood=ll,
        sweeps=sweeps,
        converged=converged,
        identifiable=identifiable,
        signal_to_bulk=float(ratio),
        exhaustive=exhaustive,
        warnings=warnings,
        **aligned,
    )


def corrupt_labels(
    assignment: CommunityAssignment, rate: float, seed: int | np.random.SeedSequence | None = None
) -> CommunityAssignment:
    """Move exactly round(rate * n) nodes to a different, uniformly chosen block."""
    if not 0.0 <= rate <= 1.0:
        raise DomainError(f"label-noise rate must lie in [0, 1], got {rate}")
    if assignment.k < 2:
        raise DomainError("label noise needs at least two blocks")
    rng = np.random.default_rng(seed)
    flipped = rng.choice(assignment.n, size=int(round(rate * assignment.n)), replace=False)
    sigma = assignment.sigma.copy()
    offsets = rng.integers(1, assignment.k, size=flipped.size)
    sigma[flipped] = (assignment.zero_based[flipped] + offsets) % assignment.k + 1
    return CommunityAssignment(sigma, assignment.k)


def estimate_delta(exact_flags: Sequence[bool], level: float | None = None) -> DeltaEstimate:
    """Failure share of exact recovery with a Clopper-Pearson interval."""
    replications = len(exact_flags)
    if replications == 0:
        raise DomainError("estimate_delta needs at least one replication")
    level = settings.CI_LEVEL if level is None else level
    failures = int(replications - np.count_nonzero(exact_flags))
    interval = stats.binomtest(failures, replications).proportion_ci(
        confidence_level=level, method="exact"
    )
    return DeltaEstimate(
        delta_hat=failures / replications,
        ci_low=float(interval.low),
        ci_high=float(interval.high),
        failures=failures,
        replications=replications,
        level=level,
    )


def fit_recovery_decay(
    n_grid: Sequence[int], delta_hats: Sequence[float], level: float | None = None
) -> DecayFit:
    """Slope of log(delta_hat) against n over grid points with 0 < delta_hat < 1."""
    level = settings.CI_LEVEL if level is None else level
    n_arr = np.asarray(n_grid, dtype=float)
    delta_arr = np.asarray(delta_hats, dtype=float)
    if n_arr.shape != delta_arr.shape:
        raise ShapeError("n_grid and delta_hats must have the same length")
    usable = (delta_arr > 0.0) & (delta_arr < 1.0)
    points = int(usable.sum())
    if points < 3:
        raise DomainError(f"need at least 3 grid points with 0 < delta_hat < 1, got {points}")
    fit = stats.linregress(n_arr[usable], np.log(delta_arr[usable]))
    half = stats.t.ppf((1.0 + level) / 2.0, points - 2) * fit.stderr
    return DecayFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_ci=(float(fit.slope - half), float(fit.slope + half)),
        points=points,
    )
