from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from torus_lab.errors import InvalidParameter
from torus_lab.lab.render import (
    NEGATIVE,
    POSITIVE,
    color_indices,
    levelset_pixels,
    read_ppm,
    render_levelset,
)


def test_sign_coloring() -> None:
    field = np.array([[1.0, -1.0], [0.0, -0.5]]) + 3j
    np.testing.assert_array_equal(color_indices(field), [[1, 0], [1, 0]])


def test_quantile_bands_are_balanced() -> None:
    field = np.arange(16, dtype=float).reshape(4, 4)
    indices = color_indices(field, bands=4)
    assert np.bincount(indices.ravel()).tolist() == [4, 4, 4, 4]
    with pytest.raises(InvalidParameter):
        color_indices(field, bands=1)


def test_ppm_round_trip(tmp_path: Path) -> None:
    field = np.array([[1.0, -1.0, 2.0]])
    path = render_levelset(field, tmp_path / "levels.ppm", scale=3)
    assert path.read_bytes().startswith(b"P6\n9 3\n255\n")
    pixels = read_ppm(path)
    assert pixels.shape == (3, 9, 3)
    assert tuple(pixels[0, 0]) == POSITIVE
    assert tuple(pixels[2, 4]) == NEGATIVE
    np.testing.assert_array_equal(pixels, levelset_pixels(field, scale=3))


def test_svg_output(tmp_path: Path) -> None:
    path = render_levelset(np.ones((2, 2)), tmp_path / "levels.svg", scale=5)
    text = path.read_text(encoding="utf-8")
    assert 'width="10" height="10"' in text
    assert text.count("<rect") == 4
    assert "#cc553c" in text


def test_rejects_unknown_format_and_scale(tmp_path: Path) -> None:
    with pytest.raises(InvalidParameter):
        render_levelset(np.ones((2, 2)), tmp_path / "levels.png")
    with pytest.raises(InvalidParameter):
        levelset_pixels(np.ones((2, 2)), scale=0)
