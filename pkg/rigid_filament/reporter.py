"""
Run reporter: CSV tables, run manifest, SVG plots and a markdown summary.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import yaml  # noqa: E402

from rigid_filament.errors import IOFailure  # noqa: E402
from rigid_filament.models.config import ScenarioConfig  # noqa: E402
from rigid_filament.models.report import CSV_SCHEMA_VERSION, ReportTable, RunReport  # noqa: E402
from rigid_filament.utils.fitting import (  # noqa: E402
    loglog_fit,
    strictly_decreasing,
    strictly_increasing,
)

SVG_HASH_SALT = "rigid-filament"


def write_csv(table: ReportTable, path: Path, config_hash: str) -> int:
    """
    Write a table with its versioned header.

    Returns:
        Number of data rows written

    Raises:
        IOFailure: The file cannot be written
    """
    lines = [
        f"# rigid_filament table={table.name} schema=v{table.schema_version}",
        f"# config_hash={config_hash}",
        ",".join(table.columns),
    ]
    lines.extend(",".join(format(value, ".17g") for value in row) for row in table.rows)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise IOFailure(f"Cannot write {path}: {e}")
    return len(table.rows)


def read_csv(path: Union[str, Path]) -> Tuple[List[str], np.ndarray]:
    """
    Read a table written by write_csv.

    Returns:
        Column names and an (rows, columns) array

    Raises:
        ValueError: The schema version is not supported
    """
    lines = Path(path).read_text().splitlines()
    schema = next((line for line in lines if line.startswith("# rigid_filament")), "")
    if f"schema=v{CSV_SCHEMA_VERSION}" not in schema:
        raise ValueError(f"Unsupported table schema in {path}: {schema!r}")
    body = [line for line in lines if line and not line.startswith("#")]
    columns = body[0].split(",")
    if len(body) == 1:
        return columns, np.zeros((0, len(columns)))
    data = np.loadtxt(body[1:], delimiter=",", ndmin=2)
    return columns, data


class RunReporter:
    """Writes the files of a run and recomputes its acceptance checks from them."""

    def __init__(self, output_dir: Union[str, Path], log_level: int = logging.INFO):
        """
        Initialize the reporter.

        Args:
            output_dir: Output directory, created if needed
            log_level: Logging level
        """
        self.output_dir = Path(output_dir)
        self.logger = logging.getLogger(__name__)
        self.logger.setLevel(log_level)
        if not self.logger.handlers:
            handler = logging.StreamHandler()
            formatter = logging.Formatter("%(levelname)s: %(message)s")
            handler.setFormatter(formatter)
            self.logger.addHandler(handler)

    def emit_outputs(self, report: RunReport, config: ScenarioConfig) -> Path:
        """
        Write CSV tables, acceptance checks, plots, manifest and summary.

        Args:
            report: Complete or partial run report
            config: Configuration of the run

        Returns:
            Path of the manifest

        Raises:
            IOFailure: The output directory cannot be written
        """
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IOFailure(f"Cannot create output directory {self.output_dir}: {e}")

        paths: Dict[str, Path] = {}
        for name, table in sorted(report.tables.items()):
            path = self.output_dir / f"{name}.csv"
            report.manifest[path.name] = write_csv(table, path, report.config_hash)
            paths[name] = path
        self.logger.info(f"Wrote {len(paths)} tables to {self.output_dir}")

        tables = {name: read_csv(path) for name, path in paths.items()}
        self._assess(report, config, tables)
        if config.output.plots:
            self._plot(report, tables)

        manifest = self._write_manifest(report)
        self._write_summary(report)
        return manifest

    # ------------------------------------------------------------------ checks

    def _assess(
        self,
        report: RunReport,
        config: ScenarioConfig,
        tables: Dict[str, Tuple[List[str], np.ndarray]],
    ) -> None:
        if report.scenario == "convergence":
            self._assess_convergence(report, tables)
        elif report.scenario == "trajectory":
            self._assess_trajectory(report, tables)
        elif report.scenario == "divergence":
            self._assess_divergence(report, config, tables)

    @staticmethod
    def _column(table: Tuple[List[str], np.ndarray], name: str) -> np.ndarray:
        columns, data = table
        return data[:, columns.index(name)]

    def _check_order(
        self,
        report: RunReport,
        label: str,
        eps: np.ndarray,
        values: np.ndarray,
        low: float,
        high: Optional[float] = None,
    ) -> Optional[float]:
        """Fit a log-log slope, store it as a metric and check it against a range."""
        try:
            slope = loglog_fit(eps, values).slope
        except ValueError as e:
            report.add_warning("Order", f"{label}: {e}")
            return None
        report.metrics[f"{label}_order"] = slope
        in_range = slope >= low and (high is None or slope <= high)
        bounds = f"[{low}, {high}]" if high is not None else f">= {low}"
        message = f"{label} fitted order {slope:.3f} (expected {bounds})"
        if in_range:
            report.add_success("Order", message)
        else:
            report.add_warning("Order", message)
        return slope

    def _assess_convergence(
        self, report: RunReport, tables: Dict[str, Tuple[List[str], np.ndarray]]
    ) -> None:
        if "convergence" not in tables or len(tables["convergence"][1]) < 2:
            report.add_warning("Convergence", "Fewer than two radii completed, no orders fitted")
            return
        table = tables["convergence"]
        eps = self._column(table, "eps")
        bstar_error = self._column(table, "bstar_error")
        if strictly_decreasing(bstar_error):
            report.add_success("Convergence", "|B^eps - B*| strictly decreasing in eps")
        else:
            report.add_warning("Convergence", "|B^eps - B*| is not strictly decreasing in eps")
        self._check_order(report, "bstar_error", eps, bstar_error, 0.7)
        self._check_order(report, "h2d_error", eps, self._column(table, "h2d_error"), 0.7, 1.3)
        self._check_order(report, "ma_norm", eps, self._column(table, "ma_norm"), 1.6, 2.3)
        self._check_order(report, "gamma_a_norm", eps, self._column(table, "gamma_a_norm"), 0.7)

        smallest = int(np.argmin(eps))
        h2d_error = float(self._column(table, "h2d_error")[smallest])
        report.metrics["h2d_error_smallest_eps"] = h2d_error
        if h2d_error <= 0.05:
            report.add_success(
                "Convergence", f"|𝓑[H_2D] - B*| = {h2d_error:.4f} at eps={eps[smallest]}"
            )
        else:
            report.add_warning("Convergence", f"|𝓑[H_2D] - B*| = {h2d_error:.4f} above 0.05")

        circulation = self._column(table, "circulation")
        worst = float(np.max(np.abs(circulation - 1.0)))
        report.metrics["circulation_error"] = worst
        if worst <= 1e-2:
            report.add_success("Harmonic", f"Circulation within {worst:.2e} of 1")
        else:
            report.add_warning("Harmonic", f"Circulation off by {worst:.2e}")
        residual = float(np.max(self._column(table, "normal_residual")))
        report.metrics["normal_residual"] = residual
        if residual <= 1e-2:
            report.add_success("Harmonic", f"Normal residual {residual:.2e} of the field RMS")
        else:
            report.add_warning("Harmonic", f"Normal residual {residual:.2e} of the field RMS")
        if strictly_decreasing(self._column(table, "h_minus_h2d")):
            report.add_success("Harmonic", "|H^eps - H_2D| decreasing in eps")
        else:
            report.add_warning("Harmonic", "|H^eps - H_2D| not decreasing in eps")

        constant = self._column(table, "jacobian_constant")
        report.metrics["jacobian_constant"] = float(np.max(constant))
        if np.max(constant) <= 2.0 * np.min(constant):
            report.add_success("Geometry", f"|w - 1| <= C dist with C = {np.max(constant):.3f}")
        else:
            report.add_warning(
                "Geometry",
                f"Jacobian constant ranges from {np.min(constant):.3f} to {np.max(constant):.3f}",
            )

    def _assess_trajectory(
        self, report: RunReport, tables: Dict[str, Tuple[List[str], np.ndarray]]
    ) -> None:
        for name, table in sorted(tables.items()):
            if not name.startswith("trajectory_") or name == "trajectory_summary":
                continue
            if len(table[1]) < 2 or np.any(self._column(table, "n_particles") > 0):
                continue
            energy = self._column(table, "energy")
            drift = float(np.max(np.abs(energy - energy[0])) / max(abs(energy[0]), 1e-300))
            report.metrics[f"{name}_energy_drift"] = drift
            if drift <= 1e-6:
                report.add_success("Energy", f"{name}: relative drift {drift:.2e}")
            else:
                report.add_warning("Energy", f"{name}: relative drift {drift:.2e} above 1e-6")

        if "trajectory_summary" in tables and len(tables["trajectory_summary"][1]) >= 2:
            summary = tables["trajectory_summary"]
            sup_error = self._column(summary, "sup_p_error")
            if strictly_decreasing(sup_error):
                report.add_success("Trajectory", "sup |p^eps - p*| decreasing in eps")
            else:
                report.add_warning("Trajectory", "sup |p^eps - p*| not decreasing in eps")
            constants = self._column(summary, "probe_constant")
            report.metrics["probe_constant_max"] = float(np.max(constants))
            report.metrics["probe_constant_min"] = float(np.min(constants))

        if "lab_crosscheck" in tables and len(tables["lab_crosscheck"][1]):
            difference = float(np.max(self._column(tables["lab_crosscheck"], "difference")))
            report.metrics["lab_difference"] = difference
            if difference <= 1e-4:
                report.add_success("Lab frame", f"Body and lab h(t) agree within {difference:.2e}")
            else:
                report.add_warning("Lab frame", f"Body and lab h(t) differ by {difference:.2e}")

    def _assess_divergence(
        self,
        report: RunReport,
        config: ScenarioConfig,
        tables: Dict[str, Tuple[List[str], np.ndarray]],
    ) -> None:
        for name, table in sorted(tables.items()):
            if not name.startswith("divergence_eps_") or len(table[1]) < 2:
                continue
            if strictly_increasing(self._column(table, "p3")):
                report.add_success("Divergence", f"{name}: p3 strictly increasing")
            else:
                report.add_warning("Divergence", f"{name}: p3 not strictly increasing")

        if "divergence_summary" not in tables or not len(tables["divergence_summary"][1]):
            return
        summary = tables["divergence_summary"]
        eps = self._column(summary, "eps")
        acceleration = self._column(summary, "initial_acceleration")
        for k in range(len(eps) - 1):
            if abs(eps[k] / eps[k + 1] - 2.0) > 0.02:
                continue
            ratio = float(acceleration[k + 1] / acceleration[k])
            report.metrics[f"acceleration_ratio_{eps[k + 1]:g}"] = ratio
            message = f"p3'(0) ratio {ratio:.3f} from eps={eps[k]:g} to eps={eps[k + 1]:g}"
            if 2.5 <= ratio <= 6.0:
                report.add_success("Divergence", message)
            else:
                report.add_warning("Divergence", message)

        d3 = self._column(summary, "D3_initial")
        predicted = self._column(summary, "D3_prediction")
        relative = np.abs(d3 - predicted) / np.abs(predicted)
        report.metrics["D3_relative_error"] = float(np.max(relative))
        if np.all(relative <= 0.25):
            report.add_success("Divergence", f"D3(0) within {np.max(relative):.1%} of s0^-4 law")
        else:
            report.add_warning("Divergence", f"D3(0) off the s0^-4 law by {np.max(relative):.1%}")

        for e, travelled, threshold in zip(
            eps, self._column(summary, "travelled"), self._column(summary, "travel_threshold")
        ):
            self.logger.info(
                f"eps={e:g}: travelled {travelled:.4e}, eps^(-1/10) threshold {threshold:.4f}"
            )

    # ------------------------------------------------------------------ plots

    def _save(self, figure: "plt.Figure", name: str, report: RunReport) -> None:
        path = self.output_dir / f"{name}.svg"
        try:
            figure.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise IOFailure(f"Cannot write {path}: {e}")
        finally:
            plt.close(figure)
        report.manifest[path.name] = 0

    def _plot(self, report: RunReport, tables: Dict[str, Tuple[List[str], np.ndarray]]) -> None:
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
            for name, table in sorted(tables.items()):
                columns, data = table
                if not len(data):
                    continue
                if name.startswith("trajectory_") and "p1" in columns:
                    self._plot_velocity(report, name, table, [f"p{i}" for i in range(1, 7)])
                elif name.startswith("divergence_eps_"):
                    self._plot_velocity(report, name, table, ["p3"])
            if "convergence" in tables:
                self._plot_orders(
                    report,
                    "convergence_orders",
                    tables["convergence"],
                    ["bstar_error", "h2d_error", "ma_norm", "gamma_a_norm"],
                )
            if "trajectory_summary" in tables:
                self._plot_orders(
                    report, "trajectory_orders", tables["trajectory_summary"], ["sup_p_error"]
                )

    def _plot_velocity(
        self,
        report: RunReport,
        name: str,
        table: Tuple[List[str], np.ndarray],
        columns: List[str],
    ) -> None:
        t = self._column(table, "t")
        figure, axis = plt.subplots(figsize=(6, 4))
        for column in columns:
            axis.plot(t, self._column(table, column), label=column)
        axis.set_xlabel("t")
        axis.set_ylabel("body velocity")
        axis.set_title(name)
        axis.legend()
        self._save(figure, name, report)

    def _plot_orders(
        self,
        report: RunReport,
        name: str,
        table: Tuple[List[str], np.ndarray],
        columns: List[str],
    ) -> None:
        eps = self._column(table, "eps")
        if len(eps) < 2:
            return
        figure, axis = plt.subplots(figsize=(6, 4))
        for column in columns:
            values = self._column(table, column)
            line = axis.loglog(eps, values, "o-", label=column)[0]
            try:
                fit = loglog_fit(eps, values)
            except ValueError:
                continue
            axis.loglog(eps, fit.predict(eps), "--", color=line.get_color())
            axis.annotate(
                f"slope {fit.slope:.2f}",
                (eps[-1], values[-1]),
                textcoords="offset points",
                xytext=(5, 0),
            )
        axis.set_xlabel("eps")
        axis.set_title(name)
        axis.legend()
        self._save(figure, name, report)

    # ------------------------------------------------------------------ manifest and summary

    def _write_manifest(self, report: RunReport) -> Path:
        path = self.output_dir / "manifest.yaml"
        content = {
            "scenario": report.scenario,
            "config_hash": report.config_hash,
            "schema_version": CSV_SCHEMA_VERSION,
            "files": [
                {"name": file_name, "rows": rows}
                for file_name, rows in sorted(report.manifest.items())
            ],
            "metrics": {key: float(value) for key, value in sorted(report.metrics.items())},
            "timings": {key: round(value, 3) for key, value in report.timings.items()},
            "halts": [
                {
                    "label": h.label,
                    "time": float(h.time),
                    "separation": float(h.separation),
                    "message": h.message,
                }
                for h in report.halts
            ],
            "summary": report.get_summary(),
        }
        try:
            path.write_text(yaml.safe_dump(content, sort_keys=False))
        except OSError as e:
            raise IOFailure(f"Cannot write {path}: {e}")
        self.logger.info(f"Manifest saved to {path}")
        return path

    def _write_summary(self, report: RunReport) -> Path:
        sections = [f"# Run Summary: {report.scenario}", f"Config hash: `{report.config_hash}`"]
        lines = ["## Checks"]
        if report.successes:
            lines.append("- ✅ **Passing Checks:**")
            lines.extend(f"  - {msg}" for msg in report.successes)
        if report.warnings:
            lines.append("- ⚠️ **Warnings:**")
            lines.extend(f"  - {msg}" for msg in report.warnings)
        if report.errors:
            lines.append("- ❌ **Errors:**")
            lines.extend(f"  - {msg}" for msg in report.errors)
        sections.append("\n".join(lines))
        if report.metrics:
            rows = ["## Metrics", "| metric | value |", "| --- | --- |"]
            rows.extend(f"| {k} | {v:.6g} |" for k, v in sorted(report.metrics.items()))
            sections.append("\n".join(rows))
        files = ["## Files"]
        files.extend(f"- `{name}` ({rows} rows)" for name, rows in sorted(report.manifest.items()))
        sections.append("\n".join(files))
        if report.timings:
            timings = ["## Timings"]
            timings.extend(f"- {label}: {s:.1f} s" for label, s in report.timings.items())
            sections.append("\n".join(timings))

        path = self.output_dir / "summary.md"
        try:
            path.write_text("\n\n".join(sections) + "\n", encoding="utf-8")
        except OSError as e:
            raise IOFailure(f"Cannot write {path}: {e}")
        self.logger.info(f"Summary saved to {path}")
        return path


def emit_outputs(
    report: RunReport, config: ScenarioConfig, log_level: int = logging.INFO
) -> Path:
    """Write every output of a run into the configured directory and return the manifest path."""
    return RunReporter(config.output.directory, log_level).emit_outputs(report, config)
