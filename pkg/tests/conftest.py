# tests/conftest.py
import os
from collections.abc import Callable
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

# Settings are read at import time, so the test environment goes in first
os.environ["PEERINF_ENVIRONMENT"] = "testing"
os.environ.setdefault("PEERINF_LOG_LEVEL", "WARNING")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from app.core.logging import setup_logging  # noqa: E402
from app.models.network import AdjacencyMatrix  # noqa: E402
from app.schemas.experiment import ExperimentConfig  # noqa: E402
from app.schemas.network import SbmParams  # noqa: E402

setup_logging()

COMMUNITY_TOML = """\
setting = "community"
n_grid = [30, 40]
replications = 3
strategies = ["naive", "oracle", "proxy"]
seed = 7

[sbm]
k = 2
rho = [0.5, 0.5]
W = [[0.5, 0.05], [0.05, 0.5]]

[coeffs]
beta_influence = 0.0
gamma1 = [3.0]
"""

CONTINUOUS_TOML = """\
setting = "continuous"
n_grid = [20, 30]
replications = 2
strategies = ["naive", "proxy"]
seed = 11

[lsp]
d = 2
link_intercept = 1.0
link_scale = 1.0

[coeffs]
beta_influence = 0.0
gamma1 = [1.0, -1.0]
"""


def clique_union(*sizes: int) -> AdjacencyMatrix:
    """Disjoint complete graphs of the given sizes."""
    n = sum(sizes)
    edges = np.zeros((n, n), dtype=np.uint8)
    start = 0
    for size in sizes:
        edges[start : start + size, start : start + size] = 1
        start += size
    np.fill_diagonal(edges, 0)
    return AdjacencyMatrix(edges)


@pytest.fixture
def two_cliques() -> AdjacencyMatrix:
    return clique_union(5, 5)


@pytest.fixture
def two_block_params() -> SbmParams:
    return SbmParams(k=2, rho=[0.5, 0.5], W=[[0.5, 0.1], [0.1, 0.5]])


@pytest.fixture
def community_config() -> Callable[..., ExperimentConfig]:
    """Small community-setting experiment; keyword arguments override top-level keys."""

    def build(**overrides: Any) -> ExperimentConfig:
        raw: dict[str, Any] = {
            "setting": "community",
            "sbm": {"k": 2, "rho": [0.5, 0.5], "W": [[0.5, 0.05], [0.05, 0.5]]},
            "coeffs": {"beta_influence": 0.0, "gamma1": [3.0]},
            "n_grid": [30, 40],
            "replications": 3,
            "strategies": ["naive", "oracle", "proxy"],
            "seed": 7,
        }
        raw.update(overrides)
        return ExperimentConfig.model_validate(raw)

    return build


@pytest.fixture
def continuous_config() -> ExperimentConfig:
    return ExperimentConfig.model_validate(tomllib.loads(CONTINUOUS_TOML))


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    def write(text: str, name: str = "config.toml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
