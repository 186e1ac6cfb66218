"""Logging setup for the command-line harness."""

from __future__ import annotations

import logging
import os
import sys

from rich.console import Console
from rich.logging import RichHandler

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def resolve_level(name: str | None) -> int:
    """Map a level name (or $TORUS_LAB_LOG_LEVEL) onto a logging level."""

    value = name or os.environ.get("TORUS_LAB_LOG_LEVEL") or "INFO"
    level = logging.getLevelName(value.upper())
    return level if isinstance(level, int) else logging.INFO


def configure_logging(level: int = logging.INFO) -> None:
    """Configure logging to stderr for the lab."""

    if logging.getLogger().handlers:
        # Assume the application configured logging already.
        return

    if sys.stderr.isatty():
        logging.basicConfig(
            level=level,
            format="%(message)s",
            handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        )
        return

    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT)
