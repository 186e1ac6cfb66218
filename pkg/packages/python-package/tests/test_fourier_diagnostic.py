from __future__ import annotations

import math

import numpy as np
import pytest

from torus_lab.errors import InvalidParameter
from torus_lab.fourier_diagnostic import (
    calibrate_threshold,
    checkerboard,
    dominant_fraction,
    geometric_filter_delta,
    level_curve,
    level_curve_distance,
    local_fourier,
    max_coefficient,
    near_level_curve,
    scaled_frequency,
    wave_fourier_variance,
    wave_fourier_variance_table,
)
from torus_lab.gaussian_wave import Window, eigen_residual, sample_wave, wave_covariance


def plane_wave(side: int, s: int, t: int) -> np.ndarray:
    x, y = np.indices((side, side))
    return np.exp(2j * np.pi * (s * x + t * y) / side)


def test_fft_matches_direct_sum(rng: np.random.Generator) -> None:
    field = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
    fast = local_fourier(field, 6, (2, 3)).coefficients
    slow = local_fourier(field, 6, (2, 3), method="direct").coefficients
    np.testing.assert_allclose(fast, slow, atol=1e-12)
    window = field[2:8, 3:9]
    assert np.sum(np.abs(fast) ** 2) == pytest.approx(np.sum(np.abs(window) ** 2))


def test_plane_wave_has_one_dominant_coefficient() -> None:
    s, t, magnitude = max_coefficient(local_fourier(plane_wave(8, 2, 3), 8))
    assert (s, t) == (2, 3)
    assert magnitude == pytest.approx(8.0)


def test_window_must_fit() -> None:
    with pytest.raises(InvalidParameter):
        local_fourier(np.zeros((4, 4)), 4, (1, 0))


def test_dominant_fraction() -> None:
    assert dominant_fraction([plane_wave(8, 1, 1)] * 3, 8, threshold_factor=0.5) == 1.0
    assert dominant_fraction([np.zeros((8, 8))], 8) == 0.0
    with pytest.raises(InvalidParameter):
        dominant_fraction([], 8)


def test_calibration_rejects_rate() -> None:
    with pytest.raises(InvalidParameter):
        calibrate_threshold(2.0, 8, np.random.default_rng(0), false_positive=0.0)


def test_variance_table_obeys_parseval() -> None:
    ell = 8
    table = wave_fourier_variance_table(1.5, ell)
    assert table.sum() == pytest.approx(ell * ell, rel=1e-6)
    assert wave_fourier_variance(1.5, ell, 2, 5).value == pytest.approx(table[2, 5], rel=1e-10)


def test_expectation_agrees_with_quadratic_form(rng: np.random.Generator) -> None:
    exact = wave_fourier_variance(2.0, 8, 1, 2).value
    estimate = wave_fourier_variance(2.0, 8, 1, 2, method="expectation", rng=rng)
    assert abs(estimate.value - exact) <= 5.0 * estimate.stderr


def test_variance_rejects_bad_frequency() -> None:
    with pytest.raises(InvalidParameter):
        wave_fourier_variance(2.0, 4, 4, 0)
    with pytest.raises(InvalidParameter):
        wave_fourier_variance(2.0, 4, 0, 0, method="expectation")


def test_checkerboard_flips_the_energy(rng: np.random.Generator) -> None:
    fields = sample_wave(wave_covariance(2.0, Window(2)), 3, rng)
    for field in fields:
        assert np.max(np.abs(eigen_residual(checkerboard(field), -2.0))) <= 2e-2


@pytest.mark.parametrize("energy", [1.0, 2.5, -2.0])
def test_level_curve_points(energy: float) -> None:
    points = level_curve(energy, 256)
    values = 2.0 * np.cos(points[:, 0]) + 2.0 * np.cos(points[:, 1])
    np.testing.assert_allclose(values, energy, atol=1e-9)


def test_level_curve_distance() -> None:
    on_curve = level_curve_distance(2.0, math.pi / 3, math.pi / 3)
    assert on_curve[0] <= 1e-3
    assert level_curve_distance(2.0, 0.0, 0.0)[0] > 0.5


def test_scaled_frequency_folds() -> None:
    alpha, beta = scaled_frequency(8, 6, 1)
    assert alpha == pytest.approx(-math.pi / 2)
    assert beta == pytest.approx(math.pi / 4)


def test_near_curve() -> None:
    assert near_level_curve(2.0, 4, 1, 0)
    assert not near_level_curve(2.0, 4, 0, 0)


def test_geometric_filter() -> None:
    assert geometric_filter_delta(2.0, 64) < math.acos(0.0)
    with pytest.raises(InvalidParameter):
        geometric_filter_delta(-1.0, 16)
