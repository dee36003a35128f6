"""
Tests for the run reporter: CSV tables, recomputed checks, plots, manifest and summary.
"""

from pathlib import Path

import numpy as np
import pytest
import yaml

from rigid_filament.errors import IOFailure
from rigid_filament.models.report import ReportTable, RunReport
from rigid_filament.parser.config_parser import parse_scenario_config_from_yaml
from rigid_filament.reporter import RunReporter, emit_outputs, read_csv, write_csv
from rigid_filament.simulator import (
    CONVERGENCE_COLUMNS,
    DIVERGENCE_SUMMARY_COLUMNS,
    LAB_COLUMNS,
    TRAJECTORY_COLUMNS,
    TRAJECTORY_SUMMARY_COLUMNS,
)


def trajectory_report() -> RunReport:
    """A trajectory report with one limit run, a summary and a lab cross-check."""
    report = RunReport("trajectory", "abc123")
    limit = report.table("trajectory_limit", TRAJECTORY_COLUMNS)
    for k in range(4):
        row = dict.fromkeys(TRAJECTORY_COLUMNS, 0.0)
        row.update(t=0.1 * k, p1=1.0 - 0.01 * k, p6=0.5, Q11=1.0, Q22=1.0, Q33=1.0, energy=0.75)
        limit.append([row[c] for c in TRAJECTORY_COLUMNS])
    summary = report.table("trajectory_summary", TRAJECTORY_SUMMARY_COLUMNS)
    summary.append([0.2, 4e-2, 1e-2, 0.1, 1e-9, 0.3, 0.0])
    summary.append([0.1, 2e-2, 5e-3, 0.2, 1e-9, 0.3, 0.0])
    lab = report.table("lab_crosscheck", LAB_COLUMNS)
    lab.append([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    lab.append([0.1, 0.1, 0.0, 0.0, 0.1, 0.0, 0.0, 1e-9])
    report.timings["limit"] = 0.25
    return report


def config_for(tmp_path: Path, scenario: str = "trajectory", plots: bool = True):
    data = {"scenario": scenario, "eps_list": [0.2, 0.1, 0.05], "dt": 0.1, "T": 0.3}
    data["output"] = {"directory": str(tmp_path), "plots": plots}
    if scenario == "divergence":
        data["curve"] = {"orientation": "clockwise"}
        data["inertia"] = {"scaling_mode": "density"}
        data["vorticity"] = {"kind": "ring", "s0": 3.0, "n_particles": 64}
    return parse_scenario_config_from_yaml(data)


def test_csv_round_trip(tmp_path) -> None:
    """Test a table reads back with its columns and exact values."""
    table = ReportTable(name="probes", columns=["t", "value"])
    table.append([0.1, 1.0 / 3.0])
    table.append([0.2, -2.5e-17])
    path = tmp_path / "probes.csv"
    assert write_csv(table, path, "abc123") == 2
    lines = path.read_text().splitlines()
    assert lines[0] == "# rigid_filament table=probes schema=v1"
    assert lines[1] == "# config_hash=abc123"
    columns, data = read_csv(path)
    assert columns == ["t", "value"]
    assert np.array_equal(data, table.as_array())


def test_csv_empty_table(tmp_path) -> None:
    """Test a table without rows reads back as an empty array."""
    path = tmp_path / "empty.csv"
    write_csv(ReportTable(name="empty", columns=["a", "b"]), path, "abc123")
    columns, data = read_csv(path)
    assert columns == ["a", "b"]
    assert data.shape == (0, 2)


def test_csv_unknown_schema(tmp_path) -> None:
    """Test tables of another schema version are rejected."""
    path = tmp_path / "old.csv"
    path.write_text("# rigid_filament table=old schema=v9\na,b\n1,2\n")
    with pytest.raises(ValueError, match="schema"):
        read_csv(path)


def test_emit_trajectory_outputs(tmp_path) -> None:
    """Test tables, plots, manifest and summary of a trajectory report."""
    report = trajectory_report()
    config = config_for(tmp_path)
    manifest_path = RunReporter(tmp_path).emit_outputs(report, config)

    assert manifest_path == tmp_path / "manifest.yaml"
    expected = [
        "trajectory_limit.csv",
        "trajectory_limit.svg",
        "trajectory_orders.svg",
        "summary.md",
    ]
    for name in expected:
        assert (tmp_path / name).exists(), name

    manifest = yaml.safe_load(manifest_path.read_text())
    assert manifest["scenario"] == "trajectory"
    assert manifest["config_hash"] == "abc123"
    files = {entry["name"]: entry["rows"] for entry in manifest["files"]}
    assert files["trajectory_limit.csv"] == 4
    assert files["trajectory_summary.csv"] == 2
    assert manifest["metrics"]["trajectory_limit_energy_drift"] == 0.0
    assert manifest["metrics"]["lab_difference"] == pytest.approx(1e-9)
    assert manifest["timings"] == {"limit": 0.25}

    assert report.metrics["probe_constant_max"] == pytest.approx(0.2)
    assert not report.has_warnings(), report.warnings
    summary = (tmp_path / "summary.md").read_text(encoding="utf-8")
    assert "# Run Summary: trajectory" in summary
    assert "✅ **Passing Checks:**" in summary
    assert "`trajectory_limit.csv` (4 rows)" in summary


def test_plots_are_reproducible(tmp_path) -> None:
    """Test two runs of the same report write identical SVG files."""
    first, second = tmp_path / "first", tmp_path / "second"
    RunReporter(first).emit_outputs(trajectory_report(), config_for(first))
    RunReporter(second).emit_outputs(trajectory_report(), config_for(second))
    for name in ["trajectory_limit.svg", "trajectory_orders.svg"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_plots_can_be_disabled(tmp_path) -> None:
    """Test no SVG is written when plots are off."""
    emit_outputs(trajectory_report(), config_for(tmp_path, plots=False))
    assert not list(tmp_path.glob("*.svg"))


def test_convergence_checks(tmp_path) -> None:
    """Test the convergence orders are fitted from the written table."""
    report = RunReport("convergence", "abc123")
    table = report.table("convergence", CONVERGENCE_COLUMNS)
    for eps in [0.2, 0.1, 0.05]:
        row = [eps, 64, 16, 1024, 2 * eps, 0.5 * eps, 3 * eps**2, 1e-3, eps, 1.0, 1e-4, 1e-3, eps]
        table.append([*row, 1.1])
    RunReporter(tmp_path).emit_outputs(report, config_for(tmp_path, "convergence", plots=False))
    assert report.metrics["bstar_error_order"] == pytest.approx(1.0)
    assert report.metrics["ma_norm_order"] == pytest.approx(2.0)
    assert report.metrics["h2d_error_smallest_eps"] == pytest.approx(0.025)
    assert report.metrics["jacobian_constant"] == pytest.approx(1.1)
    assert not report.has_warnings(), report.warnings


def test_convergence_checks_flag_wrong_order(tmp_path) -> None:
    """Test an added-mass norm falling too slowly is a warning."""
    report = RunReport("convergence", "abc123")
    table = report.table("convergence", CONVERGENCE_COLUMNS)
    for eps in [0.2, 0.1, 0.05]:
        table.append(
            [eps, 64, 16, 1024, 2 * eps, 0.01 * eps, eps, 0.0, eps, 1.0, 0.0, 0.0, eps, 1.1]
        )
    RunReporter(tmp_path).emit_outputs(report, config_for(tmp_path, "convergence", plots=False))
    assert any("ma_norm" in warning for warning in report.warnings)


def test_divergence_checks(tmp_path) -> None:
    """Test the acceleration ratio and the D3 law are checked from the summary."""
    report = RunReport("divergence", "abc123")
    summary = report.table("divergence_summary", DIVERGENCE_SUMMARY_COLUMNS)
    summary.append([0.2, 1.0, 0.01, 1e-3, 0.2**-0.1, 0.011, 0.01, 1.5, 0.5, 0.0])
    summary.append([0.1, 4.0, 0.04, 4e-3, 0.1**-0.1, 0.009, 0.01, 1.5, 0.5, 0.0])
    RunReporter(tmp_path).emit_outputs(report, config_for(tmp_path, "divergence", plots=False))
    assert report.metrics["acceleration_ratio_0.1"] == pytest.approx(4.0)
    assert report.metrics["D3_relative_error"] == pytest.approx(0.1)
    assert not report.has_warnings(), report.warnings


def test_halts_in_manifest(tmp_path) -> None:
    """Test halts are listed with plain floats."""
    report = RunReport("trajectory", "abc123")
    report.record_halt("eps_0.1", np.float64(0.25), np.float64(0.29), "too close")
    manifest = emit_outputs(report, config_for(tmp_path, plots=False))
    halts = yaml.safe_load(manifest.read_text())["halts"]
    assert halts == [{"label": "eps_0.1", "time": 0.25, "separation": 0.29, "message": "too close"}]


def test_unwritable_output_dir(tmp_path) -> None:
    """Test an output path that is a file raises IOFailure."""
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(IOFailure):
        RunReporter(blocker).emit_outputs(trajectory_report(), config_for(tmp_path))
