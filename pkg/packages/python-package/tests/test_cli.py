from __future__ import annotations

import json
from pathlib import Path

import pytest

from torus_lab import __version__, cli


def test_unset_flags_are_not_in_the_namespace() -> None:
    args = cli.build_parser().parse_args(["regularity"])
    assert args.command == "regularity"
    assert not hasattr(args, "trials")
    assert not hasattr(args, "negative_control")
    assert args.config is None


def test_list_and_option_flags_parse() -> None:
    args = cli.build_parser().parse_args(
        [
            "rho",
            "--n-values",
            "32,64",
            "--gammas",
            "0.5,1.5",
            "--offsets",
            "0:0,2:1",
            "--seed",
            "9",
            "--set",
            "images=true",
            "--set",
            "bands=4",
            "--set",
            "ells=8,16",
            "--negative-control",
        ]
    )
    assert args.n_values == [32, 64]
    assert args.gammas == [0.5, 1.5]
    assert args.offsets == [[0, 0], [2, 1]]
    assert args.master_seed == 9
    assert args.extra == [("images", True), ("bands", 4), ("ells", [8, 16])]
    assert args.negative_control is True

    config = cli.config_from_args(args)
    assert config.experiment == "rho"
    assert config.extra == {"images": True, "bands": 4, "ells": [8, 16]}


def test_unknown_command_exits() -> None:
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["tui"])


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["--version"])
    assert __version__ in capsys.readouterr().out


def test_configuration_errors_exit_with_one(tmp_path: Path) -> None:
    assert cli.main(["wave-sample", "--energy", "5", "--output-dir", str(tmp_path)]) == 1

    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"energie": 2.0}), encoding="utf-8")
    assert cli.main(["rho", "--config", str(config), "--output-dir", str(tmp_path)]) == 1


def test_unwritable_output_exits_with_one(tmp_path: Path) -> None:
    (tmp_path / "rho-3").write_text("occupied\n", encoding="utf-8")
    assert cli.main(["rho", "--seed", "3", "--output-dir", str(tmp_path)]) == 1


@pytest.mark.integration()
def test_rho_run_writes_record(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = cli.main(
        [
            "rho",
            "--seed",
            "5",
            "--grid-size",
            "40",
            "--offsets",
            "0:0,1:0",
            "--output-dir",
            str(tmp_path),
        ]
    )

    assert code == 0
    record_path = Path(capsys.readouterr().out.strip())
    assert record_path == (tmp_path / "rho-5" / "record.json").resolve()
    payload = json.loads(record_path.read_text(encoding="utf-8"))
    assert payload["passed"] is True
    assert payload["config"]["master_seed"] == 5
    expected = {"rho_0_0.csv", "rho_1_0.csv", "arcsine_0.csv", "arcsine_1.csv", "rho_checks.csv"}
    assert expected <= set(payload["artifacts"])
    header = (tmp_path / "rho-5" / "rho_1_0.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "lambda,value"


@pytest.mark.integration()
def test_failed_check_exits_with_two(tmp_path: Path) -> None:
    config = tmp_path / "strict.toml"
    config.write_text("[tolerances]\nnormalization = -1.0\n", encoding="utf-8")
    code = cli.main(
        [
            "rho",
            "--config",
            str(config),
            "--grid-size",
            "20",
            "--offsets",
            "0:0",
            "--output-dir",
            str(tmp_path),
        ]
    )
    assert code == 2
