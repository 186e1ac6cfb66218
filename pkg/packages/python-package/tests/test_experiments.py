from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from torus_lab.lab.config import EXPERIMENTS, ExperimentConfig
from torus_lab.lab.experiments import EXPERIMENTS as COMMANDS
from torus_lab.lab.experiments import RunResult, run_experiment


def run(output: Path, experiment: str, **values: Any) -> RunResult:
    config = ExperimentConfig(experiment=experiment, master_seed=1, output_dir=output)
    return run_experiment(config.update(values))


def check(result: RunResult, prefix: str) -> bool:
    matches = [c for c in result.record.checks if c.name.startswith(prefix)]
    assert matches, f"no check named {prefix!r}"
    return all(c.passed for c in matches)


def test_every_command_is_registered() -> None:
    assert set(COMMANDS) == set(EXPERIMENTS)


@pytest.mark.integration()
def test_wave_sample(tmp_path: Path) -> None:
    result = run(tmp_path, "wave-sample", trials=2000, half_width=1, extra={"batch": 500})
    assert result.record.passed
    assert result.record.derived["samples"] == 2000
    assert (result.directory.path / "wave_covariance.csv").exists()
    assert len(result.record.seeds) == 4


@pytest.mark.integration()
def test_runs_do_not_depend_on_workers(tmp_path: Path) -> None:
    serial = run(tmp_path / "a", "close-pairs", n_values=[8, 12], trials=3)
    pooled = run(tmp_path / "b", "close-pairs", n_values=[8, 12], trials=3, workers=3)
    assert serial.record.tables["close_pairs"].rows == pooled.record.tables["close_pairs"].rows
    assert serial.record.seeds == pooled.record.seeds


@pytest.mark.integration()
def test_render_writes_every_image(tmp_path: Path) -> None:
    result = run(tmp_path, "render", n=8, gammas=[0.5, 1.5], extra={"format": "svg"})
    names = sorted(p.name for p in result.directory.path.glob("*.svg"))
    assert names == ["levelset_gamma_0.5.svg", "levelset_gamma_1.5.svg", "levelset_wave.svg"]
    assert check(result, "all images written")


@pytest.mark.integration()
def test_concentration_identity(tmp_path: Path) -> None:
    result = run(tmp_path, "concentration", n=8, trials=2, extra={"window": 1.0})
    assert check(result, "t=0 overlap equals")
    assert len(result.record.tables["concentration"].rows) == 3


@pytest.mark.integration()
def test_free_conv_closed_forms(tmp_path: Path) -> None:
    result = run(tmp_path, "free-conv", n=30, trials=2)
    assert check(result, "point mass")
    assert check(result, "five_atoms")
    assert check(result, "skewed")
    assert (result.directory.path / "free_convolution.csv").exists()


@pytest.mark.integration()
def test_flow_tables(tmp_path: Path) -> None:
    result = run(
        tmp_path,
        "flow",
        n=16,
        paths=4,
        steps=5,
        energy=0.5,
        extra={"stopping_paths": 2, "euler_samples": 20},
    )
    record = result.record
    assert len(record.tables["flow"].rows) == 1
    assert record.tables["stopping"].header[-1] == "probability_over_sqrt_nt"
    assert len(record.tables["stopping"].rows) == 2
    assert len(record.tables["euler"].rows) == 1
    assert check(result, "predicted quadratic variation within crude bound")
    info = [c for c in record.checks if c.name.startswith("stopping probability")]
    assert len(info) == 1 and not info[0].acceptance
    assert (result.directory.path / "flow_path_0.csv").exists()


@pytest.mark.integration()
def test_fourier_scan_small(tmp_path: Path) -> None:
    extra = {"ells": [4, 8], "mc_ell": 4, "budget": 20_000}
    result = run(tmp_path, "fourier-scan", energy=1.5, extra=extra)
    assert len(result.record.tables["fourier_scan"].rows) == 2
    assert len(result.record.tables["fourier_mc"].rows) == 10
    assert check(result, "ell=8")


@pytest.mark.integration()
def test_regularity_and_benigni_shapes(tmp_path: Path) -> None:
    regularity = run(tmp_path, "regularity", n_values=[8, 16], trials=3)
    assert [row[0] for row in regularity.record.tables["regularity"].rows] == [8, 16]
    benigni = run(tmp_path, "benigni", n=20, trials=5)
    assert len(benigni.record.tables["projections"].rows) == 5
    assert benigni.record.derived["sigma_sq"] > 0.0


@pytest.mark.integration()
def test_benigni_variance_band_is_configurable(tmp_path: Path) -> None:
    wide = run(
        tmp_path,
        "benigni",
        n=20,
        trials=5,
        tolerances={"variance_ratio_low": 0.0, "variance_ratio_high": 1e9},
    )
    assert check(wide, "variance ratio")
    narrow = run(
        tmp_path / "narrow", "benigni", n=20, trials=5, tolerances={"variance_ratio_high": 0.0}
    )
    assert not check(narrow, "variance ratio")


@pytest.mark.integration()
def test_regularity_reports_torus_hypotheses(tmp_path: Path) -> None:
    result = run(
        tmp_path,
        "regularity",
        n_values=[8],
        trials=3,
        extra={"hypotheses": True, "hypotheses_n": 16, "nice_trials": 2},
    )
    (row,) = result.record.tables["nice_pairs"].rows
    assert row[0] == 16 and row[1] == 2
    assert 0.0 <= row[2] <= 1.0
    assert check(result, "eta Im m increases with eta")
    info = [c for c in result.record.checks if c.name == "two-sided window conditions"]
    assert len(info) == 1 and not info[0].acceptance
    assert "window_conditions" in result.record.derived


@pytest.mark.integration()
def test_phase_scan_small(tmp_path: Path) -> None:
    result = run(
        tmp_path,
        "phase-scan",
        n=12,
        ell=8,
        half_width=1,
        trials=2,
        gammas=[0.5, 1.5],
        threshold_factor=0.5,
        extra={"baseline_samples": 50, "images": True},
    )
    rows = result.record.tables["phase_scan"].rows
    assert [row[0] for row in rows] == [0.5, 1.5]
    assert (result.directory.path / "levelset_gamma_0.5.ppm").exists()
    payload = json.loads(result.record_path.read_text(encoding="utf-8"))
    assert payload["derived"]["threshold_factor"] == 0.5


@pytest.mark.slow()
@pytest.mark.parametrize(
    ("experiment", "values"),
    [
        ("rho", {}),
        ("wave-sample", {}),
        ("regularity", {}),
        ("close-pairs", {}),
        ("free-conv", {}),
        ("benigni", {}),
        ("flow", {}),
        ("flow", {"negative_control": True}),
        ("concentration", {}),
        ("fourier-scan", {}),
        ("phase-scan", {}),
    ],
)
def test_acceptance_defaults(tmp_path: Path, experiment: str, values: dict[str, Any]) -> None:
    result = run(tmp_path, experiment, workers=4, **values)
    failed = [c.name for c in result.record.checks if c.acceptance and not c.passed]
    assert not failed
