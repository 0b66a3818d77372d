"""Maximum-likelihood latent positions under the known logistic-of-distance link."""

from typing import Any

import numpy as np
from loguru import logger
from scipy.linalg import orthogonal_procrustes
from scipy.optimize import minimize
from scipy.spatial.distance import pdist, squareform
from scipy.special import expit

from app.core.exceptions import ShapeError
from app.models.embedding import EmbeddingResult, IsometryAlignment
from app.models.network import AdjacencyMatrix, LatentPositions
from app.schemas.network import LspParams, as_params
from app.schemas.options import EmbeddingOptions
from app.services.netgen import sample_coordinates

STEP_GROWTH = 1.25


def _dyad_mask(adjacency: AdjacencyMatrix) -> np.ndarray:
    if adjacency.directed:
        return ~np.eye(adjacency.n, dtype=bool)
    return np.triu(np.ones((adjacency.n, adjacency.n), dtype=bool), 1)


def lsp_log_likelihood(
    coords: np.ndarray, adjacency: AdjacencyMatrix, params: LspParams | dict[str, Any]
) -> float:
    """Sum over dyads of A_ij * eta_ij - log(1 + exp(eta_ij)), eta = theta_0 - s * distance."""
    params = as_params(LspParams, params)
    eta = params.link_intercept - params.link_scale * squareform(pdist(coords))
    terms = adjacency.as_float() * eta - np.logaddexp(0.0, eta)
    return float(terms[_dyad_mask(adjacency)].sum())


def lsp_gradient(
    coords: np.ndarray, adjacency: AdjacencyMatrix, params: LspParams | dict[str, Any]
) -> np.ndarray:
    """Closed-form gradient of ``lsp_log_likelihood`` with respect to every coordinate.

    Coincident pairs contribute nothing: the distance is not differentiable there.
    """
    params = as_params(LspParams, params)
    distances = squareform(pdist(coords))
    ties = adjacency.as_float()
    residual = ties - expit(params.link_intercept - params.link_scale * distances)
    np.fill_diagonal(residual, 0.0)
    if adjacency.directed:
        residual = residual + residual.T
    weights = np.divide(
        residual, distances, out=np.zeros_like(residual), where=distances > 0.0
    )
    return -params.link_scale * (weights.sum(axis=1)[:, None] * coords - weights @ coords)


def _separate_coincident(
    coords: np.ndarray, rng: np.random.Generator, opts: EmbeddingOptions
) -> np.ndarray:
    """Jitter one point of every pair closer than ``coincidence_tol``."""
    distances = squareform(pdist(coords))
    np.fill_diagonal(distances, np.inf)
    close = np.argwhere(np.triu(distances < opts.coincidence_tol, 1))
    if close.size == 0:
        return coords
    coords = coords.copy()
    for _, j in close:
        kick = rng.standard_normal(coords.shape[1])
        coords[j] += opts.jitter_norm * kick / np.linalg.norm(kick)
    return coords


def _ascend(
    start: np.ndarray,
    adjacency: AdjacencyMatrix,
    params: LspParams,
    opts: EmbeddingOptions,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, bool, int]:
    """Gradient ascent with backtracking halving; the accepted step carries over."""
    coords = start
    current = lsp_log_likelihood(coords, adjacency, params)
    step = opts.step_size
    for iteration in range(1, opts.max_iter + 1):
        coords = _separate_coincident(coords, rng, opts)
        current = lsp_log_likelihood(coords, adjacency, params)
        grad = lsp_gradient(coords, adjacency, params)
        if np.linalg.norm(grad) < opts.grad_tol:
            return coords, current, True, iteration
        while step >= opts.min_step:
            trial = coords + step * grad
            value = lsp_log_likelihood(trial, adjacency, params)
            if value > current:
                coords, current = trial, value
                step = min(step * STEP_GROWTH, opts.step_size)
                break
            step /= 2.0
        else:
            return coords, current, False, iteration
    return coords, current, False, opts.max_iter


def _ascend_lbfgs(
    start: np.ndarray, adjacency: AdjacencyMatrix, params: LspParams, opts: EmbeddingOptions
) -> tuple[np.ndarray, float, bool, int]:
    shape = start.shape

    def objective(flat: np.ndarray) -> tuple[float, np.ndarray]:
        coords = flat.reshape(shape)
        value = lsp_log_likelihood(coords, adjacency, params)
        return -value, -lsp_gradient(coords, adjacency, params).ravel()

    outcome = minimize(
        objective,
        start.ravel(),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": opts.max_iter, "gtol": opts.grad_tol},
    )
    return outcome.x.reshape(shape), float(-outcome.fun), bool(outcome.success), int(outcome.nit)


def align_isometry(coords_hat: LatentPositions, coords_true: LatentPositions) -> IsometryAlignment:
    """Rigid transform (reflections allowed) of coords_hat closest to coords_true."""
    if coords_hat.coords.shape != coords_true.coords.shape:
        raise ShapeError(
            f"cannot align {coords_hat.coords.shape} positions to {coords_true.coords.shape}"
        )
    center_hat = coords_hat.coords.mean(axis=0)
    center_true = coords_true.coords.mean(axis=0)
    rotation, _ = orthogonal_procrustes(
        coords_hat.coords - center_hat, coords_true.coords - center_true
    )
    translation = center_true - center_hat @ rotation
    aligned = coords_hat.coords @ rotation + translation
    errors = np.linalg.norm(aligned - coords_true.coords, axis=1)
    return IsometryAlignment(
        aligned=LatentPositions(aligned),
        rotation=rotation,
        translation=translation,
        error_sum=float(errors.sum()),
        error_max=float(errors.max(initial=0.0)),
    )


def embed_mle(
    adjacency: AdjacencyMatrix,
    params: LspParams | dict[str, Any],
    opts: EmbeddingOptions | dict[str, Any] | None = None,
    coords_true: LatentPositions | None = None,
) -> EmbeddingResult:
    """Best of several likelihood ascents started from independent draws of F."""
    params = as_params(LspParams, params)
    opts = as_params(EmbeddingOptions, opts or {})
    runs = []
    for child in np.random.SeedSequence(opts.seed).spawn(opts.n_restarts):
        rng = np.random.default_rng(child)
        start = sample_coordinates(params, adjacency.n, rng).coords
        if opts.method == "lbfgs":
            runs.append(_ascend_lbfgs(start, adjacency, params, opts))
        else:
            runs.append(_ascend(start, adjacency, params, opts, rng))

    lls = [run[1] for run in runs]
    best = int(np.argmax(lls))
    coords, ll, converged, iterations = runs[best]
    if not converged:
        logger.warning(f"best restart {best} stopped without meeting the gradient tolerance")
    logger.debug(f"embedding: n={adjacency.n}, d={params.d}, best restart {best}, ll={ll:.6g}")

    coords_hat = LatentPositions(coords)
    errors: dict[str, float] = {}
    if coords_true is not None:
        alignment = align_isometry(coords_hat, coords_true)
        errors = {
            "aligned_error_sum": alignment.error_sum,
            "aligned_error_max": alignment.error_max,
        }
    return EmbeddingResult(
        coords_hat=coords_hat,
        log_likelihood=ll,
        converged=converged,
        iterations=iterations,
        restart_log_likelihoods=lls,
        best_restart=best,
        **errors,
    )
