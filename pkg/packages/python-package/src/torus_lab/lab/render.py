"""Level-set images of Re(u): binary PPM (``P6``) or SVG."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import ArtifactError, InvalidParameter

LOG = logging.getLogger(__name__)

POSITIVE = (204, 85, 60)
NEGATIVE = (50, 110, 190)


def _palette(bands: int) -> NDArray[np.uint8]:
    weights = np.linspace(0.0, 1.0, bands)[:, None]
    colors = (1.0 - weights) * np.asarray(NEGATIVE) + weights * np.asarray(POSITIVE)
    return np.rint(colors).astype(np.uint8)


def color_indices(field: ArrayLike, bands: int | None = None) -> NDArray[np.int64]:
    """Per-cell palette index: sign of Re (0 negative, 1 non-negative) or quantile band."""

    values = np.real(np.asarray(field))
    if values.ndim != 2 or values.size == 0:
        raise InvalidParameter("render needs a non-empty rectangular field")
    if bands is None:
        return (values >= 0.0).astype(np.int64)
    if bands < 2:
        raise InvalidParameter(f"bands must be >= 2, got {bands}")
    edges = np.quantile(values, np.linspace(0.0, 1.0, bands + 1)[1:-1])
    return np.searchsorted(edges, values, side="right").astype(np.int64)


def levelset_pixels(
    field: ArrayLike, *, scale: int = 4, bands: int | None = None
) -> NDArray[np.uint8]:
    """RGB array of shape (rows * scale, cols * scale, 3)."""

    if scale < 1:
        raise InvalidParameter(f"pixel scale must be >= 1, got {scale}")
    indices = color_indices(field, bands)
    palette = _palette(2 if bands is None else bands)
    pixels = palette[indices]
    return np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)


def _ppm_bytes(pixels: NDArray[np.uint8]) -> bytes:
    height, width, _ = pixels.shape
    return f"P6\n{width} {height}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def _svg_text(field: ArrayLike, scale: int, bands: int | None) -> str:
    indices = color_indices(field, bands)
    palette = _palette(2 if bands is None else bands)
    rows, cols = indices.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * scale}" height="{rows * scale}" '
        f'shape-rendering="crispEdges">'
    ]
    for row in range(rows):
        for col in range(cols):
            r, g, b = (int(v) for v in palette[indices[row, col]])
            parts.append(
                f'<rect x="{col * scale}" y="{row * scale}" width="{scale}" height="{scale}" '
                f'fill="#{r:02x}{g:02x}{b:02x}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_levelset(
    field: ArrayLike, path: Path, *, scale: int = 4, bands: int | None = None
) -> Path:
    """Write the two-tone (or quantile-banded) image of Re(field); format from the suffix."""

    suffix = path.suffix.lower()
    try:
        if suffix == ".ppm":
            path.write_bytes(_ppm_bytes(levelset_pixels(field, scale=scale, bands=bands)))
        elif suffix == ".svg":
            if scale < 1:
                raise InvalidParameter(f"pixel scale must be >= 1, got {scale}")
            path.write_text(_svg_text(field, scale, bands), encoding="utf-8")
        else:
            raise InvalidParameter(f"unsupported image format {path.suffix!r}")
    except OSError as exc:
        raise ArtifactError(f"cannot write image {path}: {exc}") from exc
    LOG.debug("wrote %s", path)
    return path


def read_ppm(path: Path) -> NDArray[np.uint8]:
    """Parse a file written by :func:`render_levelset` back to an RGB array."""

    data = path.read_bytes()
    magic, size, depth, body = data.split(b"\n", 3)
    if magic != b"P6" or depth != b"255":
        raise InvalidParameter(f"{path} is not an 8-bit binary PPM")
    width, height = (int(v) for v in size.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
