from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from torus_lab.errors import InvalidParameter
from torus_lab.measures import AtomicMeasure


def test_point_mass_stieltjes() -> None:
    measure = AtomicMeasure.point_mass(0.5)
    z = 0.1 + 0.3j
    assert measure.stieltjes(z) == pytest.approx(1.0 / (0.5 - z))


def test_empirical_is_probability() -> None:
    measure = AtomicMeasure.empirical([0.0, 1.0, 2.0, 3.0])
    assert measure.is_probability()
    assert measure.mass(1.0, 2.0) == pytest.approx(0.5)


def test_mismatched_shapes_raise() -> None:
    with pytest.raises(InvalidParameter):
        AtomicMeasure(np.zeros(3), np.ones(2))


def test_convolution_multiplies_total_weight() -> None:
    left = AtomicMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.5j]))
    right = AtomicMeasure(np.array([-1.0, 2.0, 3.0]), np.array([1.0, 2.0, -1.0]))
    product = left.convolve(right)
    assert len(product) == 6
    assert product.total_weight == pytest.approx(left.total_weight * right.total_weight)
    assert product.locations[1 * 3 + 2] == pytest.approx(4.0)


def test_smooth_scalar_and_pruned() -> None:
    rng = np.random.default_rng(3)
    measure = AtomicMeasure.empirical(rng.uniform(-4.0, 4.0, 500))
    value = measure.smooth(0.1, 0.3)
    assert isinstance(value, float)
    grid = np.linspace(-3.0, 3.0, 301)
    full = measure.smooth(0.1, grid)
    pruned = measure.smooth(0.1, grid, prune_tol=1e-8)
    assert np.max(np.abs(full - pruned)) <= measure.total_variation * 1e-8 / 0.1


def test_smoothing_integrates_to_pi_times_mass() -> None:
    measure = AtomicMeasure(np.array([0.0, 0.4]), np.array([0.3, 0.7]))
    grid = np.linspace(-400.0, 400.0, 400_001)
    assert np.trapezoid(measure.smooth(0.5, grid), grid) == pytest.approx(np.pi, rel=2e-3)


def test_absolute_and_sorted() -> None:
    measure = AtomicMeasure(np.array([2.0, -1.0]), np.array([-3.0, 1j]))
    assert measure.absolute().total_weight == pytest.approx(4.0)
    np.testing.assert_array_equal(measure.sorted().locations, [-1.0, 2.0])


def test_to_csv(tmp_path: Path) -> None:
    path = AtomicMeasure.point_mass(1.5, 2 - 1j).to_csv(tmp_path / "mu.csv")
    assert path.read_text(encoding="utf-8").splitlines() == [
        "location,re_weight,im_weight",
        "1.5,2.0,-1.0",
    ]
