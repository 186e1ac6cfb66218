"""Experiment configuration.

Values are layered, lowest precedence first: dataclass defaults, the
environment (``TORUS_LAB_OUTPUT_DIR``, ``TORUS_LAB_SEED``), a JSON or TOML
file, then command-line flags.  File keys are the field names below; dashes
are accepted in place of underscores.  Example TOML::

    experiment = "regularity"
    n_values = [32, 64, 128]
    trials = 200
    master_seed = 7

    [tolerances]
    ratio_low = 0.5
"""

from __future__ import annotations

import json
import math
import os
import tomllib
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..errors import ConfigError, InvalidParameter
from ..torus_spectrum import check_scale_constraints

EXPERIMENTS = (
    "rho",
    "wave-sample",
    "phase-scan",
    "regularity",
    "close-pairs",
    "free-conv",
    "benigni",
    "flow",
    "concentration",
    "fourier-scan",
    "render",
)

# Experiments whose matrices are n^2 x n^2 torus Hamiltonians.
_TORUS_MATRIX = ("phase-scan", "concentration", "render")
MAX_TORUS_SIDE = 64


def _default_output_dir() -> Path:
    return Path(os.environ.get("TORUS_LAB_OUTPUT_DIR", "runs"))


def _default_seed() -> int:
    raw = os.environ.get("TORUS_LAB_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError as exc:
        raise ConfigError(f"TORUS_LAB_SEED must be an integer, got {raw!r}") from exc


@dataclass(slots=True)
class ExperimentConfig:
    """Parameters of one experiment run; ``None`` means the experiment default."""

    experiment: str = "rho"
    n: int | None = None
    n_values: list[int] = field(default_factory=list)
    energy: float = 2.0
    gamma: float | None = None
    gammas: list[float] = field(default_factory=list)
    delta: float = 0.5
    epsilon: float = 0.01
    ell: int = 16
    half_width: int = 3
    eta: float | None = None
    r: float | None = None
    t: float | None = None
    trials: int | None = None
    paths: int = 200
    steps: int = 50
    master_seed: int = field(default_factory=_default_seed)
    output_dir: Path = field(default_factory=_default_output_dir)
    workers: int = 1
    grid_size: int = 1000
    pixel_scale: int = 4
    offsets: list[list[int]] = field(default_factory=lambda: [[0, 0], [1, 0], [1, 1]])
    negative_control: bool = False
    threshold_factor: float | None = None
    allow_large: bool = False
    tolerances: dict[str, float] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------
    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def update(self, values: Mapping[str, Any]) -> ExperimentConfig:
        """Apply ``values`` in place; unknown keys raise :class:`ConfigError`."""

        known = set(self.field_names())
        for raw_key, value in values.items():
            key = raw_key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown configuration key {raw_key!r}")
            if key == "output_dir" and value is not None:
                value = Path(value)
            if key in ("tolerances", "extra"):
                if not isinstance(value, Mapping):
                    raise ConfigError(f"{key} must be a table of values")
                merged = dict(getattr(self, key))
                merged.update(value)
                value = merged
            setattr(self, key, value)
        return self

    @classmethod
    def load(
        cls, path: Path | None = None, overrides: Mapping[str, Any] | None = None
    ) -> ExperimentConfig:
        config = cls()
        if path is not None:
            config.update(read_config_file(path))
        if overrides:
            config.update(overrides)
        return config

    # ------------------------------------------------------------------
    # Derived values
    # ------------------------------------------------------------------
    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def option(self, name: str, default: Any) -> Any:
        return self.extra.get(name, default)

    def time_for(self, n: int, gamma: float) -> float:
        """t = n^(-2 gamma), or the configured ``t`` when it is given."""

        return self.t if self.t is not None else float(n) ** (-2.0 * gamma)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------
    def validate(self) -> ExperimentConfig:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.paths < 2 or self.steps < 1:
            raise ConfigError("flow needs paths >= 2 and steps >= 1")
        if self.pixel_scale < 1 or self.grid_size < 2:
            raise ConfigError("pixel_scale must be >= 1 and grid_size >= 2")
        if self.half_width < 0 or self.ell < 1:
            raise ConfigError("half_width must be >= 0 and ell >= 1")
        if self.eta is not None and not self.eta > 0.0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.r is not None and not self.r > 0.0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if self.t is not None and self.t < 0.0:
            raise ConfigError(f"t must be non-negative, got {self.t}")
        for n in [*self.n_values, *([self.n] if self.n is not None else [])]:
            if n < 2:
                raise ConfigError(f"n must be >= 2, got {n}")
        for pair in self.offsets:
            if len(pair) != 2:
                raise ConfigError(f"offsets must be pairs, got {pair!r}")
        self._validate_time()
        self._validate_energy()
        if self.experiment in _TORUS_MATRIX and not self.allow_large:
            for n in self.sides(default=32):
                if n > MAX_TORUS_SIDE:
                    raise ConfigError(
                        f"n={n} gives a {n * n}x{n * n} matrix; set allow_large to run it"
                    )
        if self.experiment == "phase-scan":
            if not 0.0 < self.delta < 1.0:
                raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
            for gamma in self.gamma_list(default=(0.5,)):
                if not gamma > 0.0:
                    raise ConfigError(f"gamma must be positive, got {gamma}")
        if self.experiment == "close-pairs" and not 0.0 < self.energy < 4.0:
            raise ConfigError(f"close-pairs needs energy in (0, 4), got {self.energy}")
        if self.extra.get("scale_constraints"):
            try:
                check_scale_constraints(self.epsilon, self.gamma if self.gamma is not None else 0.5)
            except InvalidParameter as exc:
                raise ConfigError(str(exc)) from exc
        return self

    def _validate_time(self) -> None:
        if self.t is None or self.gamma is None:
            return
        n = self.n if self.n is not None else (self.n_values[0] if self.n_values else None)
        if n is None:
            return
        expected = float(n) ** (-2.0 * self.gamma)
        if not math.isclose(self.t, expected, rel_tol=1e-9):
            raise ConfigError(
                f"t={self.t} is inconsistent with gamma={self.gamma} at n={n}"
                f" (n^-2gamma={expected:.6g})"
            )

    def _validate_energy(self) -> None:
        needs_bulk = ("wave-sample", "phase-scan", "fourier-scan", "render", "regularity")
        if self.experiment in needs_bulk and (not -4.0 < self.energy < 4.0 or self.energy == 0.0):
            raise ConfigError(f"energy must lie in (-4, 4) without 0, got {self.energy}")

    # ------------------------------------------------------------------
    # Parameter lists
    # ------------------------------------------------------------------
    def sides(self, default: int | tuple[int, ...]) -> list[int]:
        if self.n_values:
            return list(self.n_values)
        if self.n is not None:
            return [self.n]
        return [default] if isinstance(default, int) else list(default)

    def gamma_list(self, default: tuple[float, ...]) -> list[float]:
        if self.gammas:
            return list(self.gammas)
        if self.gamma is not None:
            return [self.gamma]
        return list(default)

    def as_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["output_dir"] = str(self.output_dir)
        return payload


def read_config_file(path: Path) -> dict[str, Any]:
    """Parse a ``.json`` or ``.toml`` configuration file."""

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            data: Any = tomllib.loads(text)
        elif suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(f"config {path} must end in .json or .toml")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a table at top level")
    return data
