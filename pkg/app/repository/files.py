"""Flat-file persistence for networks, panels, fits and experiment results.

Formats (UTF-8, LF line endings):
  edges      one "i<TAB>j" pair per line, 0-indexed, i < j when undirected
  labels     CSV "node,label" (or "node,label_hat"), labels 1-based
  positions  CSV "node,x1,...,xd"
  panel      CSV "node,t,y"
  covariates CSV "node,x1,...,xp"
"""

import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.core.exceptions import OutputExistsError, ReportError
from app.models.behavior import BehaviorPanel
from app.models.network import AdjacencyMatrix, CommunityAssignment, LatentPositions


class FileRepository:
    """Reads and writes the toolkit's file formats under one directory."""

    def __init__(self, root: str | Path, overwrite: bool = False) -> None:
        self.root = Path(root)
        self.overwrite = overwrite

    def path(self, name: str) -> Path:
        return self.root / name

    def reserve(self, name: str) -> Path:
        """Path for a new file, refusing existing ones unless overwriting."""
        target = self.path(name)
        if target.exists() and not self.overwrite:
            raise OutputExistsError(f"{target} exists; pass --overwrite to replace it")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ReportError(f"cannot create {target.parent}: {exc}") from exc
        return target

    def _write_text(self, name: str, text: str) -> Path:
        target = self.reserve(name)
        try:
            with target.open("w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        except OSError as exc:
            raise ReportError(f"cannot write {target}: {exc}") from exc
        return target

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        # float_format=None keeps the shortest repr that round-trips exactly
        return self._write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def read_frame(self, name: str) -> pd.DataFrame:
        source = self.path(name)
        try:
            return pd.read_csv(source, float_precision="round_trip", keep_default_na=True)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise ReportError(f"cannot read {source}: {exc}") from exc

    def write_json(self, name: str, payload: dict[str, Any]) -> Path:
        return self._write_text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def read_json(self, name: str) -> dict[str, Any]:
        source = self.path(name)
        try:
            with source.open(encoding="utf-8") as handle:
                return json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise ReportError(f"cannot read {source}: {exc}") from exc

    # Networks

    def write_edge_list(self, name: str, adjacency: AdjacencyMatrix) -> Path:
        lines = [f"{i}\t{j}\n" for i, j in adjacency.edge_list()]
        return self._write_text(name, "".join(lines))

    def read_edge_list(
        self, name: str, n: int | None = None, directed: bool = False
    ) -> AdjacencyMatrix:
        """Rebuild A; without ``n`` the node count is the largest index plus one."""
        source = self.path(name)
        try:
            pairs = np.loadtxt(source, dtype=np.int64, delimiter="\t", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ReportError(f"cannot read edge list {source}: {exc}") from exc
        pairs = pairs.reshape(-1, 2)
        size = n if n is not None else (int(pairs.max()) + 1 if pairs.size else 0)
        edges = np.zeros((size, size), dtype=np.uint8)
        edges[pairs[:, 0], pairs[:, 1]] = 1
        if not directed:
            edges[pairs[:, 1], pairs[:, 0]] = 1
        return AdjacencyMatrix(edges, directed=directed)

    def write_labels(
        self, name: str, assignment: CommunityAssignment, column: str = "label"
    ) -> Path:
        frame = pd.DataFrame({"node": np.arange(assignment.n), column: assignment.sigma})
        return self.write_frame(name, frame)

    def read_labels(self, name: str, k: int) -> CommunityAssignment:
        frame = self.read_frame(name).sort_values("node")
        return CommunityAssignment(frame.iloc[:, 1].to_numpy(), k)

    def write_positions(self, name: str, positions: LatentPositions) -> Path:
        frame = pd.DataFrame(positions.coords, columns=[f"x{j + 1}" for j in range(positions.d)])
        frame.insert(0, "node", np.arange(positions.n))
        return self.write_frame(name, frame)

    def read_positions(self, name: str) -> LatentPositions:
        frame = self.read_frame(name).sort_values("node")
        return LatentPositions(frame.drop(columns="node").to_numpy(dtype=float))

    # Panels

    def write_panel(self, name: str, panel: BehaviorPanel) -> Path:
        n, periods = panel.Y.shape
        frame = pd.DataFrame(
            {
                "node": np.repeat(np.arange(n), periods),
                "t": np.tile(np.arange(periods), n),
                "y": panel.Y.ravel(),
            }
        )
        return self.write_frame(name, frame)

    def write_covariates(self, name: str, panel: BehaviorPanel) -> Path:
        frame = pd.DataFrame(panel.X, columns=[f"x{j + 1}" for j in range(panel.X.shape[1])])
        frame.insert(0, "node", np.arange(panel.n))
        return self.write_frame(name, frame)

    def read_panel(self, name: str, covariates: str | None = None) -> BehaviorPanel:
        """Panel without generating coefficients; enough for estimation."""
        frame = self.read_frame(name)
        wide = frame.pivot(index="node", columns="t", values="y").sort_index()
        X = np.empty((wide.shape[0], 0))
        if covariates is not None:
            X = self.read_frame(covariates).sort_values("node").drop(columns="node").to_numpy()
        return BehaviorPanel(Y=wide.to_numpy(dtype=float), X=X, coeffs=None, T=wide.shape[1] - 1)
