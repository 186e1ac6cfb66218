from __future__ import annotations

import json
from pathlib import Path

import pytest
from rich.console import Console

from torus_lab.lab.records import RunRecord


def make_record() -> RunRecord:
    record = RunRecord(experiment="close-pairs", config={"n": 64})
    table = record.table("close_pairs", ["n", "count"])
    table.add_row(64, 12)
    record.check("spread <= 2", True, 1.4, "<= 2")
    record.check("pooled samples", False, 150.0, ">= 200", acceptance=False)
    return record


def test_table_is_created_once() -> None:
    record = make_record()
    assert record.table("close_pairs", ["ignored"]).header == ["n", "count"]
    with pytest.raises(ValueError, match="expects 2 columns"):
        record.tables["close_pairs"].add_row(1)


def test_informational_checks_do_not_fail_the_run(caplog: pytest.LogCaptureFixture) -> None:
    record = make_record()
    assert record.passed
    with caplog.at_level("WARNING"):
        record.check("spread <= 2", False, 3.1, "<= 2")
    assert not record.passed
    assert "check spread <= 2 failed" in caplog.text


def test_write_persists_tables_and_record(tmp_path: Path) -> None:
    record = make_record()
    record.add_failure("close-pairs/n=64", 3, "EmptyWindow: no eigenvalues")
    record.add_artifact(tmp_path / "extra.csv")
    path = record.write(tmp_path)

    assert path.name == "record.json"
    assert (tmp_path / "close_pairs.csv").read_text(encoding="utf-8") == "n,count\n64,12\n"
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["passed"] is True
    assert payload["artifacts"] == ["close_pairs.csv", "extra.csv"]
    assert payload["failures"][0]["index"] == 3
    assert [check["acceptance"] for check in payload["checks"]] == [True, False]


def test_summary_renders() -> None:
    record = make_record()
    record.add_failure("s", 0, "boom")
    console = Console(record=True, width=120)
    console.print(record.summary())
    text = console.export_text()
    assert "spread <= 2" in text
    assert "FAIL (info)" in text
    assert "1 failed trial(s)" in text
