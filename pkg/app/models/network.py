"""Network records: the observed tie structure and the latent truth behind it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.core.exceptions import ParameterValidationError, ShapeError


@dataclass(frozen=True)
class AdjacencyMatrix:
    """n x n binary tie structure; ``edges[i, j] = 1`` when i receives a tie from j."""

    edges: np.ndarray
    directed: bool = False

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1]:
            raise ShapeError(f"adjacency must be square, got shape {edges.shape}")
        if not np.all(np.isin(edges, (0, 1))):
            raise ParameterValidationError("adjacency entries must be 0 or 1")
        if np.any(np.diag(edges) != 0):
            raise ParameterValidationError("adjacency must have a zero diagonal")
        if not self.directed and not np.array_equal(edges, edges.T):
            raise ParameterValidationError("undirected adjacency must be symmetric")
        object.__setattr__(self, "edges", edges.astype(np.uint8, copy=False))

    @property
    def n(self) -> int:
        return int(self.edges.shape[0])

    @property
    def edge_count(self) -> int:
        total = int(self.edges.sum())
        return total if self.directed else total // 2

    @property
    def density(self) -> float:
        pairs = self.n * (self.n - 1) if self.directed else self.n * (self.n - 1) / 2
        return self.edge_count / pairs if pairs else 0.0

    def in_degrees(self) -> np.ndarray:
        return self.edges.sum(axis=1).astype(float)

    def as_float(self) -> np.ndarray:
        return self.edges.astype(float)

    def edge_list(self) -> np.ndarray:
        """0-indexed (i, j) pairs; i < j when undirected."""
        if self.directed:
            rows, cols = np.nonzero(self.edges)
        else:
            rows, cols = np.nonzero(np.triu(self.edges, 1))
        return np.column_stack([rows, cols])


@dataclass(frozen=True)
class CommunityAssignment:
    """Node-to-block map with 1-based labels in {1..k}."""

    sigma: np.ndarray
    k: int

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma)
        if sigma.ndim != 1:
            raise ShapeError(f"sigma must be a vector, got shape {sigma.shape}")
        if self.k < 1:
            raise ParameterValidationError(f"k must be >= 1, got {self.k}")
        integral = np.all(sigma == np.round(sigma))
        if sigma.size and (not integral or sigma.min() < 1 or sigma.max() > self.k):
            raise ParameterValidationError(f"labels must lie in 1..{self.k}")
        object.__setattr__(self, "sigma", sigma.astype(np.int64))

    @property
    def n(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def zero_based(self) -> np.ndarray:
        return self.sigma - 1

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.zero_based, minlength=self.k)

    def relabel(self, permutation: np.ndarray) -> CommunityAssignment:
        """Map label a to ``permutation[a - 1]``."""
        return CommunityAssignment(np.asarray(permutation)[self.zero_based], self.k)


@dataclass(frozen=True)
class LatentPositions:
    """n x d real coordinates, one row per node."""

    coords: np.ndarray

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2:
            raise ShapeError(f"coords must be an n x d matrix, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ParameterValidationError("latent coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def d(self) -> int:
        return int(self.coords.shape[1])

