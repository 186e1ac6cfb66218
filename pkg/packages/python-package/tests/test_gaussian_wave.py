from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from torus_lab.errors import CovarianceNotPSD, InvalidParameter
from torus_lab.gaussian_wave import (
    Window,
    WindowCovariance,
    covariance_distance,
    eigen_residual,
    empirical_covariance,
    entry_correlation,
    field_to_csv,
    sample_wave,
    wave_covariance,
)


def test_window_enumeration_is_row_major() -> None:
    window = Window(2)
    offsets = window.offsets
    assert window.size == 25
    assert tuple(offsets[0]) == (-2, -2)
    assert tuple(offsets[1]) == (-2, -1)
    assert window.index(0, 0) == 12
    with pytest.raises(InvalidParameter):
        window.index(3, 0)


def test_wave_covariance_structure() -> None:
    covariance = wave_covariance(2.0, Window(3))
    entries = covariance.entries
    np.testing.assert_allclose(np.diag(entries), 1.0)
    np.testing.assert_allclose(entries, entries.T, atol=1e-14)
    assert covariance.min_eigenvalue >= -1e-6


@pytest.mark.parametrize("energy", [0.0, 4.0, -4.5])
def test_wave_covariance_rejects_energy(energy: float) -> None:
    with pytest.raises(InvalidParameter):
        wave_covariance(energy, Window(1))


def test_square_root_rejects_negative_spectrum() -> None:
    covariance = WindowCovariance(energy=1.0, window=Window(0), entries=np.array([[-1.0]]))
    with pytest.raises(CovarianceNotPSD):
        covariance.square_root()


def test_identity_covariance_gives_standard_entries(rng: np.random.Generator) -> None:
    window = Window(1)
    covariance = WindowCovariance(energy=1.0, window=window, entries=np.eye(window.size))
    fields = sample_wave(covariance, 20_000, rng)
    assert fields.shape == (20_000, 3, 3)
    values = fields[:, 1, 1]
    assert np.mean(np.abs(values) ** 2) == pytest.approx(1.0, abs=0.05)
    assert np.var(values.real) == pytest.approx(0.5, abs=0.03)
    assert np.var(values.imag) == pytest.approx(0.5, abs=0.03)
    assert abs(np.mean(values.real * values.imag)) <= 0.02


def test_empirical_covariance_converges(rng: np.random.Generator) -> None:
    covariance = wave_covariance(2.0, Window(1))
    fields = sample_wave(covariance, 50_000, rng)
    max_abs, frob_rel = covariance_distance(empirical_covariance(fields), covariance)
    assert max_abs <= 0.03
    assert frob_rel <= 0.03


def test_wave_samples_solve_the_eigen_equation(rng: np.random.Generator) -> None:
    fields = sample_wave(wave_covariance(1.5, Window(2)), 100, rng)
    assert np.max(np.abs(eigen_residual(fields, 1.5))) <= 2e-2


def test_single_field_is_a_stack_of_one() -> None:
    field = np.arange(9, dtype=np.complex128).reshape(3, 3)
    estimate = empirical_covariance(field)
    assert estimate.shape == (9, 9)
    assert estimate[4, 4] == pytest.approx(16.0)


def test_distance_helpers() -> None:
    target = wave_covariance(2.0, Window(1)).entries
    assert entry_correlation(target, target) == pytest.approx(1.0)
    with pytest.raises(InvalidParameter):
        covariance_distance(np.eye(2), np.eye(3))


def test_field_to_csv(tmp_path: Path) -> None:
    field = np.full((3, 3), 1 + 2j)
    path = field_to_csv(field, tmp_path / "field.csv", energy=2.0)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "dx,dy,re,im"
    assert lines[1] == "-1,-1,1.0,2.0"
    assert path.with_suffix(".json").exists()
    with pytest.raises(InvalidParameter):
        field_to_csv(np.zeros((2, 2)), tmp_path / "even.csv", energy=2.0)
