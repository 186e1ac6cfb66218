"""Run directories and the CSV / JSON writers used for every artifact."""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ArtifactError

LOG = logging.getLogger(__name__)


@dataclass(slots=True)
class RunDirectory:
    """Output directory of one experiment run."""

    experiment: str
    seed: int
    path: Path


def format_run_name(experiment: str, seed: int) -> str:
    """Return the directory name for a run; reruns with the same seed share it."""

    return f"{experiment}-{seed}"


def ensure_run_directory(output_root: Path, experiment: str, seed: int) -> RunDirectory:
    """Create or reuse ``<output_root>/<experiment>-<seed>``.

    Args:
        output_root: Base directory under which run directories live.
        experiment: Subcommand name.
        seed: Master seed of the run.

    Returns:
        A :class:`RunDirectory` describing the ensured directory.

    Raises:
        ArtifactError: if the path exists as a file or cannot be created.
    """

    target = output_root.resolve() / format_run_name(experiment, seed)
    if target.exists() and not target.is_dir():
        raise ArtifactError(f"{target} exists and is not a directory")
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactError(f"Failed to create run directory {target}: {exc}") from exc
    LOG.debug("run directory %s", target)
    return RunDirectory(experiment=experiment, seed=seed, path=target)


def format_cell(value: Any) -> str:
    """Floats as ``repr`` so that tables round-trip exactly."""

    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    try:
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(value) for value in row])
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return path


def _to_json(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path: Path, payload: Any) -> Path:
    try:
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True, default=_to_json, ensure_ascii=False)
            + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return path
