"""Command-line entry point for the torus-lab experiments."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from rich.console import Console

from . import __version__
from .errors import ArtifactError, ConfigError, InvalidParameter
from .lab.config import EXPERIMENTS, ExperimentConfig
from .lab.experiments import run_experiment
from .logs import configure_logging, resolve_level

LOG = logging.getLogger(__name__)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _offsets(text: str) -> list[list[int]]:
    """``"0:0,1:0"`` -> [[0, 0], [1, 0]]."""

    pairs = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        pairs.append([int(a), int(b)])
    return pairs


def _key_value(text: str) -> tuple[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    for cast in (int, float):
        try:
            return key, cast(raw)
        except ValueError:
            pass
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return key, lowered == "true"
    if "," in raw:
        return key, [_key_value(f"_={item}")[1] for item in raw.split(",")]
    return key, raw


def build_parser() -> argparse.ArgumentParser:
    """Create the CLI parser; unset flags leave the config file values alone."""

    parser = argparse.ArgumentParser(
        prog="torus-lab",
        description="Run reproducible eigenvector experiments on the perturbed discrete torus",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"torus-lab {__version__}",
    )
    parser.add_argument(
        "command",
        choices=EXPERIMENTS,
        help="Experiment to run.",
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON or TOML configuration file; flags override its values",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        help="Logging level (default: INFO or $TORUS_LAB_LOG_LEVEL)",
    )
    parser.add_argument(
        "--seed",
        dest="master_seed",
        type=int,
        help="Master seed (default: 0 or $TORUS_LAB_SEED)",
    )
    parser.add_argument(
        "--output-dir",
        type=Path,
        help="Root for run directories (default: ./runs or $TORUS_LAB_OUTPUT_DIR)",
    )
    parser.add_argument("--workers", type=int, help="Worker threads for trials (default: 1)")
    parser.add_argument("--trials", type=int, help="Trials per parameter point")
    parser.add_argument("-n", "--n", type=int, help="Torus side or matrix dimension")
    parser.add_argument("--n-values", type=_int_list, help="Comma-separated sizes, e.g. 32,64,128")
    parser.add_argument("--energy", type=float, help="Spectral energy E (default: 2)")
    parser.add_argument("--gamma", type=float, help="Noise exponent, t = n^(-2 gamma)")
    parser.add_argument("--gammas", type=_float_list, help="Comma-separated noise exponents")
    parser.add_argument(
        "--delta", type=float, help="Window exponent, width n^-delta (default: 0.5)"
    )
    parser.add_argument("--epsilon", type=float, help="Scale exponent (default: 0.01)")
    parser.add_argument("--ell", type=int, help="Fourier window side (default: 16)")
    parser.add_argument("--half-width", type=int, help="Covariance window half-width (default: 3)")
    parser.add_argument("--eta", type=float, help="Smoothing scale")
    parser.add_argument("--r", type=float, help="Close-pairs window radius (default: 0.25)")
    parser.add_argument("--t", type=float, help="Noise variance; overrides gamma")
    parser.add_argument("--paths", type=int, help="Flow paths (default: 200)")
    parser.add_argument("--steps", type=int, help="Flow steps per path (default: 50)")
    parser.add_argument("--grid-size", type=int, help="Density grid points (default: 1000)")
    parser.add_argument("--pixel-scale", type=int, help="Pixels per lattice site (default: 4)")
    parser.add_argument(
        "--offsets", type=_offsets, help="Offsets a:b,... for rho (default: 0:0,1:0,1:1)"
    )
    parser.add_argument(
        "--threshold-factor", type=float, help="Dominant-coefficient threshold / ell"
    )
    parser.add_argument(
        "--negative-control",
        action="store_true",
        help="Omit the drift in the flow residual",
    )
    parser.add_argument(
        "--allow-large",
        action="store_true",
        help="Permit torus sides above 64",
    )
    parser.add_argument(
        "--set",
        dest="extra",
        type=_key_value,
        action="append",
        help="Experiment-specific option KEY=VALUE (repeatable)",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = vars(args).copy()
    path = values.pop("config", None)
    values.pop("log_level", None)
    values["experiment"] = values.pop("command")
    if "extra" in values:
        values["extra"] = dict(values["extra"])
    return ExperimentConfig.load(path, values)


def main(argv: list[str] | None = None) -> int:
    """Parse CLI arguments and run one experiment.

    Returns 0 when every acceptance check passed, 2 when a check failed and
    1 for configuration or output errors.
    """

    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(resolve_level(args.log_level))
    try:
        config = config_from_args(args)
        result = run_experiment(config)
    except (ConfigError, InvalidParameter, ArtifactError) as exc:
        LOG.error("%s", exc)
        return 1
    Console(stderr=True).print(result.record.summary())
    print(result.record_path)
    return 0 if result.record.passed else 2


def run(argv: list[str] | None = None) -> None:
    """Execute the CLI and exit the current process."""

    sys.exit(main(argv))


if __name__ == "__main__":  # pragma: no cover
    run()
