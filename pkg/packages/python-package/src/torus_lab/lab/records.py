"""Run records: config echo, derived parameters, seeds, tables and checks."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from rich.table import Table as RichTable

from .artifacts import write_csv, write_json

LOG = logging.getLogger(__name__)


@dataclass(slots=True)
class ResultTable:
    """A named table persisted as ``<name>.csv``."""

    name: str
    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.header):
            raise ValueError(
                f"table {self.name} expects {len(self.header)} columns, got {len(values)}"
            )
        self.rows.append(list(values))


@dataclass(slots=True)
class CheckResult:
    """A named pass/fail check; ``acceptance`` checks decide the exit code."""

    name: str
    passed: bool
    value: float | None = None
    threshold: str = ""
    acceptance: bool = True


@dataclass(slots=True)
class RunRecord:
    experiment: str
    config: dict[str, Any]
    derived: dict[str, Any] = field(default_factory=dict)
    seeds: list[int] = field(default_factory=list)
    tables: dict[str, ResultTable] = field(default_factory=dict)
    checks: list[CheckResult] = field(default_factory=list)
    failures: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    wall_clock: float = 0.0

    def table(self, name: str, header: Sequence[str]) -> ResultTable:
        existing = self.tables.get(name)
        if existing is None:
            existing = ResultTable(name=name, header=list(header))
            self.tables[name] = existing
        return existing

    def check(
        self,
        name: str,
        passed: bool,
        value: float | None = None,
        threshold: str = "",
        *,
        acceptance: bool = True,
    ) -> CheckResult:
        result = CheckResult(
            name=name, passed=bool(passed), value=value, threshold=threshold, acceptance=acceptance
        )
        self.checks.append(result)
        if not result.passed:
            LOG.warning("check %s failed (value=%s, threshold %s)", name, value, threshold)
        return result

    def add_failure(self, stream: str, index: int, error: str) -> None:
        self.failures.append({"stream": stream, "index": index, "error": error})

    def add_artifact(self, path: Path) -> Path:
        self.artifacts.append(path.name)
        return path

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.acceptance)

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------
    def write(self, directory: Path) -> Path:
        """Write ``record.json`` and one CSV per table; return the record path."""

        for table in self.tables.values():
            path = write_csv(directory / f"{table.name}.csv", table.header, table.rows)
            if path.name not in self.artifacts:
                self.artifacts.append(path.name)
        payload = {
            "experiment": self.experiment,
            "config": self.config,
            "derived": self.derived,
            "seeds": self.seeds,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "value": c.value,
                    "threshold": c.threshold,
                    "acceptance": c.acceptance,
                }
                for c in self.checks
            ],
            "failures": self.failures,
            "artifacts": sorted(self.artifacts),
            "passed": self.passed,
            "wall_clock": self.wall_clock,
        }
        return write_json(directory / "record.json", payload)

    def summary(self) -> RichTable:
        table = RichTable(title=f"{self.experiment} ({self.wall_clock:.1f}s)")
        table.add_column("check")
        table.add_column("value", justify="right")
        table.add_column("threshold")
        table.add_column("status")
        for check in self.checks:
            value = "" if check.value is None else f"{check.value:.6g}"
            status = "[green]ok[/green]" if check.passed else "[red]FAIL[/red]"
            if not check.acceptance:
                status += " (info)"
            table.add_row(check.name, value, check.threshold, status)
        if self.failures:
            table.caption = f"{len(self.failures)} failed trial(s)"
        return table
