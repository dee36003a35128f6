"""
Run report model for scenario runs.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

CSV_SCHEMA_VERSION = 1


@dataclass
class ReportTable:
    """A named numeric table, written as one CSV file."""

    name: str
    columns: List[str]
    rows: List[List[float]] = field(default_factory=list)
    schema_version: int = CSV_SCHEMA_VERSION

    def append(self, values: Sequence[float]) -> None:
        """
        Append one row.

        Args:
            values: One value per column

        Raises:
            ValueError: If the row length does not match the columns
        """
        if len(values) != len(self.columns):
            raise ValueError(
                f"Table '{self.name}' has {len(self.columns)} columns, got {len(values)} values"
            )
        self.rows.append([float(v) for v in values])

    def as_array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(self.columns)))
        return np.asarray(self.rows, dtype=np.float64)

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]


@dataclass
class HaltInfo:
    """Where and why a run stopped early."""

    label: str
    time: float
    separation: float
    message: str


class RunReport:
    """Tables, checks, halts, metrics and timings of one scenario run."""

    def __init__(self, scenario: str, config_hash: str) -> None:
        self.scenario = scenario
        self.config_hash = config_hash
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.successes: List[str] = []
        self.tables: Dict[str, ReportTable] = {}
        self.timings: Dict[str, float] = {}
        self.manifest: Dict[str, int] = {}
        self.metrics: Dict[str, float] = {}
        self.halts: List[HaltInfo] = []
        self.runtime_failure = False
        self.validation_failure = False

    @staticmethod
    def _entry(category: str, message: str) -> str:
        return f"{category}: {message}"

    def add_error(self, category: str, message: str) -> None:
        """Record a failed part of the run, e.g. one eps that could not be meshed."""
        self.errors.append(self._entry(category, message))

    def add_warning(self, category: str, message: str) -> None:
        """Record a check that did not meet its expected value."""
        self.warnings.append(self._entry(category, message))

    def add_success(self, category: str, message: str) -> None:
        """Record a passing check."""
        self.successes.append(self._entry(category, message))

    def has_errors(self) -> bool:
        return bool(self.errors)

    def has_warnings(self) -> bool:
        return bool(self.warnings)

    def table(self, name: str, columns: Optional[List[str]] = None) -> ReportTable:
        """
        Get a table, creating it on first use.

        Raises:
            KeyError: If the table does not exist and no columns are given
        """
        if name not in self.tables:
            if columns is None:
                raise KeyError(f"No table named '{name}'")
            self.tables[name] = ReportTable(name=name, columns=list(columns))
        return self.tables[name]

    def add_timing(self, label: str, seconds: float) -> None:
        self.timings[label] = self.timings.get(label, 0.0) + seconds

    def record_halt(self, label: str, time: float, separation: float, message: str) -> None:
        """Record a run that stopped on a separation violation."""
        self.halts.append(HaltInfo(label=label, time=time, separation=separation, message=message))
        self.add_error("Halt", f"{label} stopped at t={time:.6g}: {message}")

    @property
    def halted(self) -> bool:
        return len(self.halts) > 0

    def get_summary(self) -> Dict[str, int]:
        """Counts of errors, warnings, successes, tables and halts."""
        return {
            "errors": len(self.errors),
            "warnings": len(self.warnings),
            "successes": len(self.successes),
            "tables": len(self.tables),
            "halts": len(self.halts),
        }

    def get_formatted_report(self) -> str:
        """
        Plain-text report for the terminal: checks by severity, then tables and metrics.

        Returns:
            Formatted report string
        """
        sections = []
        for title, entries in (
            ("Errors", self.errors),
            ("Warnings", self.warnings),
            ("Passing checks", self.successes),
        ):
            if entries:
                sections.append("\n".join([f"{title}:"] + [f"  - {e}" for e in entries]))
        if self.tables:
            rows = [f"  - {name}: {len(t.rows)} rows" for name, t in sorted(self.tables.items())]
            sections.append("\n".join(["Tables:"] + rows))
        if self.metrics:
            values = [f"  - {key} = {value:.6g}" for key, value in sorted(self.metrics.items())]
            sections.append("\n".join(["Metrics:"] + values))
        return "\n\n".join(sections)
