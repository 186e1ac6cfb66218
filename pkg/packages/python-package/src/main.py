"""Run the lab from a source checkout, e.g. ``uv run src/main.py rho --seed 1``."""

from __future__ import annotations

from torus_lab.cli import run

if __name__ == "__main__":  # pragma: no cover
    run()
