from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from torus_lab.errors import ArtifactError
from torus_lab.lab.artifacts import (
    RunDirectory,
    ensure_run_directory,
    format_cell,
    format_run_name,
    write_csv,
    write_json,
)


def test_ensure_run_directory_creates_and_reuses(tmp_path: Path) -> None:
    first: RunDirectory = ensure_run_directory(tmp_path / "runs", "regularity", 7)

    assert first.path.is_dir()
    assert first.path.name == format_run_name("regularity", 7) == "regularity-7"

    (first.path / "marker.txt").write_text("kept\n", encoding="utf-8")
    second = ensure_run_directory(tmp_path / "runs", "regularity", 7)
    assert second.path == first.path
    assert (second.path / "marker.txt").exists()


def test_ensure_run_directory_errors_when_path_is_a_file(tmp_path: Path) -> None:
    (tmp_path / "rho-0").write_text("not a directory\n", encoding="utf-8")

    with pytest.raises(ArtifactError):
        ensure_run_directory(tmp_path, "rho", 0)


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (True, "true"),
        (np.bool_(False), "false"),
        (np.int64(3), "3"),
        (0.1, "0.1"),
        (np.float64(1e-17), "1e-17"),
        (None, ""),
        ("label", "label"),
    ],
)
def test_format_cell(value: object, expected: str) -> None:
    assert format_cell(value) == expected


def test_write_csv_round_trips_floats(tmp_path: Path) -> None:
    value = 1.0 / 3.0
    path = write_csv(tmp_path / "table.csv", ["n", "ratio"], [[32, value]])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["n,ratio", f"32,{value!r}"]
    assert float(lines[1].split(",")[1]) == value


def test_write_csv_reports_missing_directory(tmp_path: Path) -> None:
    with pytest.raises(ArtifactError):
        write_csv(tmp_path / "missing" / "table.csv", ["a"], [])


def test_write_json_handles_numpy_and_complex(tmp_path: Path) -> None:
    payload = {"b": np.arange(3), "a": 1 + 2j, "c": np.float32(0.5), "path": tmp_path}
    path = write_json(tmp_path / "record.json", payload)
    text = path.read_text(encoding="utf-8")
    assert text.endswith("}\n")
    assert list(json.loads(text)) == ["a", "b", "c", "path"]
    assert json.loads(text)["a"] == [1.0, 2.0]
    assert json.loads(text)["b"] == [0, 1, 2]
