"""Command-line entry point for the peer-influence toolkit."""

import argparse
import sys
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import NoReturn

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

import numpy as np
from loguru import logger
from prometheus_client import write_to_textfile
from pydantic import ValidationError

from app.core.config.settings import settings
from app.core.exceptions import ConfigurationError, ExcessiveFailuresError, PeerInfluenceError
from app.core.logging import setup_logging
from app.core.metrics import REGISTRY
from app.models.network import AdjacencyMatrix
from app.repository.files import FileRepository
from app.schemas.bound import BoundInput
from app.schemas.experiment import ExperimentConfig, load_config
from app.schemas.options import Strategy
from app.services.behavior import simulate_panel
from app.services.bias_bound import max_bias_bound
from app.services.communities import detect_communities
from app.services.embedding import embed_mle
from app.services.experiment import run_experiment
from app.services.inference import estimate_influence
from app.services.netgen import dummy_encode, sample_lsp, sample_sbm
from app.services.report import FORMAT_FILES, emit_report, load_result

Handler = Callable[[argparse.Namespace], None]

METRICS_FILE = "metrics.prom"


class CommandParser(argparse.ArgumentParser):
    """Usage errors exit with 1; exit code 2 is reserved for failed replications."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        raise ConfigurationError(f"'{args.command}' needs --config")
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _out(args: argparse.Namespace, config: ExperimentConfig | None = None) -> FileRepository:
    root = args.out or (config.output_dir if config is not None else Path("."))
    overwrite = args.overwrite or (config.overwrite if config is not None else False)
    return FileRepository(root, overwrite=overwrite)


def _adjacency(args: argparse.Namespace, config: ExperimentConfig) -> AdjacencyMatrix:
    network = config.sbm if config.setting == "community" else config.lsp
    directed = bool(network is not None and network.directed)
    path = Path(args.edges)
    return FileRepository(path.parent).read_edge_list(path.name, n=args.n, directed=directed)


def _locations(path: str, config: ExperimentConfig) -> np.ndarray:
    source = Path(path)
    repository = FileRepository(source.parent)
    if config.setting == "community":
        assert config.sbm is not None
        return dummy_encode(repository.read_labels(source.name, config.sbm.k))
    return repository.read_positions(source.name).coords


def _optional_locations(path: str | None, config: ExperimentConfig) -> np.ndarray | None:
    return _locations(path, config) if path else None


def cmd_generate(args: argparse.Namespace) -> None:
    config = _config(args)
    n = args.n or config.n_grid[0]
    out = _out(args, config)
    if config.setting == "community":
        assert config.sbm is not None
        adjacency, sigma = sample_sbm(config.sbm, n, config.seed)
        out.write_labels("labels.csv", sigma)
    else:
        assert config.lsp is not None
        adjacency, positions = sample_lsp(config.lsp, n, config.seed)
        out.write_positions("positions.csv", positions)
    out.write_edge_list("edges.tsv", adjacency)
    logger.info(f"generated n={n} with {adjacency.edge_count} edges into {out.root}")


def cmd_detect(args: argparse.Namespace) -> None:
    config = _config(args)
    if config.sbm is None:
        raise ConfigurationError("detect needs an [sbm] section")
    adjacency = _adjacency(args, config)
    truth = None
    if args.labels:
        source = Path(args.labels)
        truth = FileRepository(source.parent).read_labels(source.name, config.sbm.k)
    options = config.detection.model_copy(update={"seed": config.seed})
    result = detect_communities(adjacency, config.sbm.k, options, sigma_true=truth)
    out = _out(args, config)
    out.write_labels("labels_hat.csv", result.sigma_hat, column="label_hat")
    out.write_json("detection.json", result.summary())


def cmd_embed(args: argparse.Namespace) -> None:
    config = _config(args)
    if config.lsp is None:
        raise ConfigurationError("embed needs an [lsp] section")
    adjacency = _adjacency(args, config)
    truth = None
    if args.positions:
        source = Path(args.positions)
        truth = FileRepository(source.parent).read_positions(source.name)
    options = config.embedding.model_copy(update={"seed": config.seed})
    result = embed_mle(adjacency, config.lsp, options, coords_true=truth)
    out = _out(args, config)
    out.write_positions("positions_hat.csv", result.coords_hat)
    out.write_json("embedding.json", result.summary())


def cmd_simulate(args: argparse.Namespace) -> None:
    config = _config(args)
    if args.locations is None:
        raise ConfigurationError("simulate needs --locations (labels or positions file)")
    adjacency = _adjacency(args, config)
    panel = simulate_panel(
        adjacency,
        _locations(args.locations, config),
        config.coeffs,
        config.T,
        config.seed,
        config.normalize_exposure,
    )
    out = _out(args, config)
    out.write_panel("panel.csv", panel)
    out.write_covariates("covariates.csv", panel)
    for message in panel.warnings:
        logger.warning(message)


def cmd_estimate(args: argparse.Namespace) -> None:
    config = _config(args)
    if args.panel is None:
        raise ConfigurationError("estimate needs --panel")
    adjacency = _adjacency(args, config)
    source = Path(args.panel)
    panel = FileRepository(source.parent).read_panel(source.name)
    panel = replace(panel, exposure_normalized=config.normalize_exposure)
    estimated = _optional_locations(args.estimated_locations, config)
    controls = {
        Strategy.ORACLE: _optional_locations(args.true_locations, config),
        Strategy.PROXY: estimated,
        Strategy.ADDITIVE: estimated,
    }
    out = _out(args, config)
    for strategy in config.strategies:
        fit = estimate_influence(
            panel,
            adjacency,
            strategy,
            controls.get(strategy),
            degree=config.additive_degree,
            pooled=config.pooled,
        )
        out.write_json(f"fit_{strategy.value}.json", fit.to_dict())
        logger.info(f"{strategy.value}: beta_hat={fit.beta_hat:.6g} (se {fit.beta_se:.3g})")


def cmd_bound(args: argparse.Namespace) -> None:
    if args.config is None:
        raise ConfigurationError("bound needs --config")
    try:
        with Path(args.config).open("rb") as handle:
            raw = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot read bound input {args.config}: {exc}") from exc
    result = max_bias_bound(BoundInput.model_validate(raw))
    _out(args).write_json("bound.json", result.to_dict())
    logger.info(f"bound_value={result.bound_value:.6g}")


def cmd_experiment(args: argparse.Namespace) -> None:
    config = _config(args)
    out = _out(args, config)
    formats = args.format or list(FORMAT_FILES)
    # Fail before the Monte Carlo run, not after it
    names = [FORMAT_FILES[f] for f in formats]
    if settings.ENABLE_METRICS:
        names.append(METRICS_FILE)
    for name in names:
        out.reserve(name)
    result = run_experiment(config, args.workers)
    emit_report(
        result,
        out.root,
        formats,
        overwrite=out.overwrite,
        log_scale=args.log_scale or config.log_scale,
    )
    if settings.ENABLE_METRICS:
        write_to_textfile(str(out.path(METRICS_FILE)), REGISTRY)
    if result.failure_rate > settings.FAILURE_TOLERANCE:
        raise ExcessiveFailuresError(
            f"{result.failure_rate:.1%} of replications failed "
            f"(tolerance {settings.FAILURE_TOLERANCE:.0%})"
        )


def cmd_report(args: argparse.Namespace) -> None:
    source = args.input or args.out
    if source is None:
        raise ConfigurationError("report needs --out (or --input) naming a result directory")
    result = load_result(source)
    emit_report(
        result,
        args.out or source,
        args.format or ["svg"],
        overwrite=args.overwrite,
        log_scale=args.log_scale,
    )


COMMANDS: dict[str, tuple[Handler, str]] = {
    "generate": (cmd_generate, "sample one network and its latent truth"),
    "detect": (cmd_detect, "recover block labels from an edge list"),
    "embed": (cmd_embed, "estimate latent positions from an edge list"),
    "simulate": (cmd_simulate, "simulate a behavior panel on a network"),
    "estimate": (cmd_estimate, "fit the influence regression per strategy"),
    "bound": (cmd_bound, "evaluate the finite-sample bias bound"),
    "experiment": (cmd_experiment, "run a Monte Carlo experiment and write its report"),
    "report": (cmd_report, "re-emit and verify a stored experiment report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = CommandParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--workers", type=int, help="parallel replications")
    common.add_argument("--out", help="output directory")
    common.add_argument(
        "--format", action="append", choices=sorted(FORMAT_FILES), help="report format (repeatable)"
    )
    common.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    common.add_argument("--log-level", default=None, help="override PEERINF_LOG_LEVEL")
    common.add_argument("--edges", help="edge-list file")
    common.add_argument("--n", type=int, help="node count")
    common.add_argument("--labels", help="true labels CSV")
    common.add_argument("--positions", help="true positions CSV")
    common.add_argument("--locations", help="labels or positions to simulate on")
    common.add_argument("--true-locations", help="true labels or positions (oracle)")
    common.add_argument(
        "--estimated-locations", help="recovered labels or positions (proxy, additive)"
    )
    common.add_argument("--panel", help="panel CSV")
    common.add_argument("--input", help="result directory to read")
    common.add_argument("--log-scale", action="store_true", help="log-scale y axis")

    parser = CommandParser(
        prog="peerinf", description="Peer-influence estimation under latent homophily"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (handler, description) in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=description)
        command.set_defaults(handler=handler)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        args.handler(args)
    except PeerInfluenceError as exc:
        logger.error(f"{args.command} failed: {exc.message}")
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"{args.command} failed validation: {exc}")
        return 1
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
