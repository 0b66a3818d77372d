"""Report emission, reloading and integrity checks."""

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from app.core.exceptions import OutputExistsError, ReportError, ResultIntegrityError
from app.models.experiment import ExperimentResult
from app.schemas.experiment import ExperimentConfig
from app.services.experiment import run_experiment
from app.services.report import PLOT_FILE, ROWS_FILE, SUMMARY_FILE, emit_report, load_result

pytestmark = pytest.mark.integration

SVG_USE = "{http://www.w3.org/2000/svg}use"


@pytest.fixture(scope="module")
def community_result() -> ExperimentResult:
    config = ExperimentConfig.model_validate(
        {
            "setting": "community",
            "sbm": {"k": 2, "rho": [0.5, 0.5], "W": [[0.5, 0.05], [0.05, 0.5]]},
            "coeffs": {"beta_influence": 0.0, "gamma1": [3.0]},
            "n_grid": [30, 40, 50],
            "replications": 2,
            "strategies": ["naive", "oracle", "proxy"],
            "seed": 3,
        }
    )
    return run_experiment(config)


def _markers(svg: Path, gid: str) -> int:
    root = ET.parse(svg).getroot()
    groups = [element for element in root.iter() if element.get("id") == gid]
    assert len(groups) == 1
    return sum(1 for element in groups[0].iter() if element.tag == SVG_USE)


def test_emit_writes_every_format(tmp_path: Path, community_result: ExperimentResult) -> None:
    written = emit_report(community_result, tmp_path)
    assert sorted(path.name for path in written) == sorted([ROWS_FILE, SUMMARY_FILE, PLOT_FILE])
    summary = json.loads((tmp_path / SUMMARY_FILE).read_text(encoding="utf-8"))
    assert summary["meta"]["n_grid"] == [30, 40, 50]
    header = (tmp_path / ROWS_FILE).read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("n,replication,strategy,status,beta_hat")


def test_svg_has_one_curve_per_strategy(
    tmp_path: Path, community_result: ExperimentResult
) -> None:
    emit_report(community_result, tmp_path, ["svg"])
    for strategy in community_result.strategies:
        assert _markers(tmp_path / PLOT_FILE, f"bias-{strategy}") == 3
    assert _markers(tmp_path / PLOT_FILE, "delta-hat") == 3


def test_svg_is_byte_stable(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path / "a", ["svg"])
    emit_report(community_result, tmp_path / "b", ["svg"])
    assert (tmp_path / "a" / PLOT_FILE).read_bytes() == (tmp_path / "b" / PLOT_FILE).read_bytes()


def test_log_scale_plot(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path, ["svg"], log_scale=True)
    assert (tmp_path / PLOT_FILE).stat().st_size > 0


def test_existing_report_is_protected(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path)
    before = (tmp_path / SUMMARY_FILE).read_bytes()
    with pytest.raises(OutputExistsError):
        emit_report(community_result, tmp_path)
    assert (tmp_path / SUMMARY_FILE).read_bytes() == before
    emit_report(community_result, tmp_path, overwrite=True)


def test_reload_round_trip(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path, ["csv", "json"])
    loaded = load_result(tmp_path)
    assert loaded.summary == community_result.summary
    assert len(loaded.rows) == len(community_result.rows)
    assert loaded.rows["beta_hat"].tolist() == community_result.rows["beta_hat"].tolist()
    assert loaded.failure_rate == community_result.failure_rate


def test_tampered_summary_is_detected(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path, ["csv", "json"])
    path = tmp_path / SUMMARY_FILE
    summary = json.loads(path.read_text(encoding="utf-8"))
    summary["grid"][0]["failure_share"] = 0.5
    path.write_text(json.dumps(summary), encoding="utf-8")
    with pytest.raises(ResultIntegrityError):
        load_result(tmp_path)


def test_truncated_rows_are_detected(tmp_path: Path, community_result: ExperimentResult) -> None:
    emit_report(community_result, tmp_path, ["csv", "json"])
    path = tmp_path / ROWS_FILE
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    path.write_text("".join(lines[:-1]), encoding="utf-8")
    with pytest.raises(ResultIntegrityError, match="rows"):
        load_result(tmp_path)


def test_missing_result_directory(tmp_path: Path) -> None:
    with pytest.raises(ReportError):
        load_result(tmp_path / "nothing-here")


def test_unknown_format_rejected(tmp_path: Path, community_result: ExperimentResult) -> None:
    with pytest.raises(ReportError, match="unknown"):
        emit_report(community_result, tmp_path, ["pdf"])


def test_empty_result_rejected(tmp_path: Path, community_result: ExperimentResult) -> None:
    empty = ExperimentResult(rows=community_result.rows.iloc[0:0], summary=community_result.summary)
    with pytest.raises(ReportError, match="no rows"):
        emit_report(empty, tmp_path)


def test_diagnostics_survive_reload(tmp_path: Path) -> None:
    config = ExperimentConfig.model_validate(
        {
            "setting": "community",
            "sbm": {"k": 2, "rho": [0.5, 0.5], "W": [[0.5, 0.05], [0.05, 0.5]]},
            "coeffs": {"gamma1": [3.0]},
            "n_grid": [30],
            "replications": 3,
            "strategies": ["oracle", "proxy"],
            "label_noise": 0.1,
            "diagnostics": True,
        }
    )
    result = run_experiment(config)
    emit_report(result, tmp_path, ["csv", "json"])
    loaded = load_result(tmp_path)
    assert loaded.summary["diagnostics"] == result.summary["diagnostics"]
