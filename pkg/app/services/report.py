"""Result files: raw rows as CSV, the summary as JSON, bias curves as static SVG."""

from collections.abc import Iterable
from pathlib import Path
from typing import Any

import matplotlib
import numpy as np
from loguru import logger
from matplotlib.figure import Figure

from app.core.exceptions import OutputExistsError, ReportError, ResultIntegrityError
from app.models.experiment import ExperimentResult
from app.repository.files import FileRepository
from app.services.experiment import order_rows, summarize_rows

ROWS_FILE = "rows.csv"
SUMMARY_FILE = "summary.json"
PLOT_FILE = "bias.svg"
FORMAT_FILES = {"csv": ROWS_FILE, "json": SUMMARY_FILE, "svg": PLOT_FILE}

# Fixed hash salt and no timestamp keep the SVG byte-stable across runs
SVG_STYLE = {"svg.hashsalt": "peerinf", "svg.fonttype": "none"}


def _series(grid: list[dict[str, Any]], pick: Any) -> list[float]:
    values = [pick(entry) for entry in grid]
    return [np.nan if value is None else value for value in values]


def _plot(result: ExperimentResult, target: Path, log_scale: bool) -> None:
    grid = result.summary["grid"]
    n_values = [entry["n"] for entry in grid]
    with matplotlib.rc_context(SVG_STYLE):
        fig = Figure(figsize=(7, 4.5))
        ax = fig.subplots()
        for strategy in result.strategies:
            values = _series(grid, lambda e, s=strategy: e["strategies"][s]["abs_bias"])
            ax.plot(
                n_values, values, marker="o", label=f"|bias| {strategy}", gid=f"bias-{strategy}"
            )
        if any(entry["delta_hat"] is not None for entry in grid):
            ax.plot(
                n_values,
                _series(grid, lambda e: e["delta_hat"]),
                marker="s",
                linestyle="--",
                color="0.4",
                label="delta-hat",
                gid="delta-hat",
            )
        if log_scale:
            ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("|mean bias| and failure share")
        ax.legend()
        fig.tight_layout()
        fig.savefig(target, format="svg", metadata={"Date": None})


def emit_report(
    result: ExperimentResult,
    out_dir: str | Path,
    formats: Iterable[str] = ("csv", "json", "svg"),
    overwrite: bool = False,
    log_scale: bool = False,
) -> list[Path]:
    """Write the requested formats; refuses to touch existing files unless ``overwrite``."""
    formats = list(dict.fromkeys(formats))
    unknown = set(formats) - set(FORMAT_FILES)
    if unknown:
        raise ReportError(f"unknown report formats {sorted(unknown)}")
    if result.rows.empty:
        raise ReportError("result has no rows to report")

    repository = FileRepository(out_dir, overwrite=overwrite)
    existing = [repository.path(FORMAT_FILES[f]) for f in formats]
    existing = [p for p in existing if p.exists()]
    if existing and not overwrite:
        raise OutputExistsError(f"{[str(p) for p in existing]} exist; pass --overwrite")

    written = []
    if "csv" in formats:
        written.append(repository.write_frame(ROWS_FILE, result.rows))
    if "json" in formats:
        written.append(repository.write_json(SUMMARY_FILE, result.summary))
    if "svg" in formats:
        target = repository.reserve(PLOT_FILE)
        try:
            _plot(result, target, log_scale)
        except OSError as exc:
            raise ReportError(f"cannot write {target}: {exc}") from exc
        written.append(target)
    logger.info(f"wrote {[p.name for p in written]} to {repository.root}")
    return written


def load_result(result_dir: str | Path) -> ExperimentResult:
    """Read rows and summary back, recompute the summary from the rows and compare."""
    repository = FileRepository(result_dir)
    stored = repository.read_json(SUMMARY_FILE)
    meta = stored.get("meta")
    if not isinstance(meta, dict):
        raise ResultIntegrityError(f"{repository.path(SUMMARY_FILE)} has no meta block")
    rows = order_rows(repository.read_frame(ROWS_FILE), list(meta["strategies"]))
    rows["error"] = rows["error"].fillna("")

    expected = len(meta["n_grid"]) * meta["replications"] * len(meta["strategies"])
    if len(rows) != expected:
        raise ResultIntegrityError(f"expected {expected} rows, found {len(rows)}")
    recomputable = {key: value for key, value in stored.items() if key != "diagnostics"}
    if summarize_rows(rows, meta) != recomputable:
        raise ResultIntegrityError("summary on disk does not match the one recomputed from rows")
    failed = (rows.drop_duplicates(["n", "replication"])["status"] != "ok").mean()
    return ExperimentResult(rows=rows, summary=stored, failure_rate=float(failed))
