"""
Experiment configuration: one Monte Carlo study over a grid of network sizes.

Configs are TOML files; see README.md for the grammar. Unknown keys anywhere are
hard errors.
"""

from pathlib import Path
from typing import Literal

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.exceptions import ConfigurationError
from app.schemas.behavior import StructuralCoeffs
from app.schemas.network import LspParams, SbmParams
from app.schemas.options import DetectionOptions, EmbeddingOptions, Strategy


def _harness_embedding() -> EmbeddingOptions:
    return EmbeddingOptions(method="lbfgs", n_restarts=4)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    setting: Literal["community", "continuous"]
    sbm: SbmParams | None = None
    lsp: LspParams | None = None
    coeffs: StructuralCoeffs
    n_grid: list[int] = Field(description="Strictly increasing node counts")
    replications: int = Field(ge=1)
    strategies: list[Strategy]
    seed: int = Field(default=0, ge=0)
    output_dir: Path = Path("results")
    workers: int | None = Field(default=None, ge=1)

    T: int = Field(default=1, ge=1, description="Transitions per panel")
    pooled: bool = False
    normalize_exposure: bool = False
    additive_degree: int = Field(default=2, ge=1)
    label_noise: float | None = Field(
        default=None, description="Replace detection by truth with this share of flipped labels"
    )
    inject_truth_as_proxy: bool = False
    diagnostics: bool = Field(
        default=False, description="Covariance diagnostics per n; keeps every replication in memory"
    )
    ci_level: float = 0.95
    overwrite: bool = False
    log_scale: bool = False

    detection: DetectionOptions = Field(default_factory=DetectionOptions)
    embedding: EmbeddingOptions = Field(default_factory=_harness_embedding)

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        if self.setting == "community":
            if self.sbm is None:
                raise ConfigurationError("the community setting needs an [sbm] section")
            width, what = self.sbm.k - 1, "k - 1"
            if self.sbm.k < 2:
                raise ConfigurationError("the community setting needs k >= 2")
        else:
            if self.lsp is None:
                raise ConfigurationError("the continuous setting needs an [lsp] section")
            if self.label_noise is not None or self.diagnostics:
                raise ConfigurationError(
                    "label_noise and diagnostics apply to the community setting only"
                )
            width, what = self.lsp.d, "d"
        if len(self.coeffs.gamma1) != width:
            raise ConfigurationError(f"gamma1 must have {what} = {width} entries")
        if not self.n_grid:
            raise ConfigurationError("n_grid must not be empty")
        if any(n < 2 for n in self.n_grid):
            raise ConfigurationError("every grid point needs n >= 2")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:], strict=False)):
            raise ConfigurationError(f"n_grid must be strictly increasing, got {self.n_grid}")
        if not self.strategies:
            raise ConfigurationError("at least one strategy is required")
        if self.diagnostics and Strategy.PROXY not in self.strategies:
            raise ConfigurationError("diagnostics need the proxy strategy for gamma0")
        if len(set(self.strategies)) != len(self.strategies):
            raise ConfigurationError("strategies must not repeat")
        if self.label_noise is not None and not 0.0 <= self.label_noise <= 1.0:
            raise ConfigurationError("label_noise must lie in [0, 1]")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigurationError("ci_level must lie in (0, 1)")
        return self

    @property
    def location_width(self) -> int:
        if self.setting == "community":
            assert self.sbm is not None
            return self.sbm.k - 1
        assert self.lsp is not None
        return self.lsp.d


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment config."""
    path = Path(path)
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid TOML: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config {path}: {exc}") from exc
