from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from torus_lab.errors import ArtifactError, InvalidParameter
from torus_lab.random_matrix import is_hermitian
from torus_lab.resolvent_flow import (
    FlowObservable,
    FlowState,
    drift_residual,
    flow_endpoint_spectra,
    euler_bias,
    euler_order_ratio,
    flow_increment,
    flow_step,
    qv_check,
    record_observables,
    simulate_path,
    simulate_paths,
    stopping_time_experiment,
)


def synthetic_paths(rng: np.random.Generator, count: int, noise: float) -> list[FlowObservable]:
    """Paths with m dm/dz = 1 whose increments are dt plus noise."""

    times = np.linspace(0.0, 1.0, 11)
    paths = []
    for _ in range(count):
        steps = 0.1 + noise * (rng.standard_normal(10) + 1j * rng.standard_normal(10))
        path = FlowObservable(z=0.5j, xs=(0,), n=4)
        path.times = list(times)
        m = np.concatenate([[1.0 + 0j], 1.0 + np.cumsum(steps)])
        path.m_path = list(m)
        path.dm_path = list(1.0 / m)
        path.g_paths = [np.array([1j])] * 11
        path.dg_paths = [np.array([0j])] * 11
        paths.append(path)
    return paths


def test_increment_variance(rng: np.random.Generator) -> None:
    n, dt = 4, 0.5
    draws = np.stack([flow_increment(n, dt, rng) for _ in range(20_000)])
    assert is_hermitian(draws[0])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(dt / n, rel=0.03)


def test_flow_step(rng: np.random.Generator) -> None:
    state = FlowState.from_diagonal([0.0, 1.0])
    nxt = flow_step(state, 0.1, rng)
    assert nxt.t == pytest.approx(0.1)
    assert state.t == 0.0
    with pytest.raises(InvalidParameter):
        flow_step(state, 0.0, rng)


def test_observables_at_start() -> None:
    diagonal = np.array([-1.0, 0.0, 2.0])
    z = 0.3 + 0.2j
    observable = FlowObservable(z=z, xs=(0, 2))
    record_observables(FlowState.from_diagonal(diagonal), z, observable.xs, observable)
    _, m, dm, g, dg = observable.arrays()
    assert m[0] == pytest.approx(np.mean(1.0 / (diagonal - z)))
    assert dm[0] == pytest.approx(np.mean(1.0 / (diagonal - z) ** 2))
    np.testing.assert_allclose(g[0], 1.0 / (diagonal[[0, 2]] - z))
    np.testing.assert_allclose(dg[0], 1.0 / (diagonal[[0, 2]] - z) ** 2)
    with pytest.raises(InvalidParameter):
        record_observables(FlowState.from_diagonal(diagonal), 0.3 + 0j, (0,), observable)


def test_record_schedule(rng: np.random.Generator, tmp_path: Path) -> None:
    start = FlowState.from_diagonal(np.linspace(-1.0, 1.0, 6))
    path = simulate_path(start, 0.1j, (0,), 0.01, 10, rng, record_every=3)
    times, *_ = path.arrays()
    np.testing.assert_allclose(times, [0.0, 0.003, 0.006, 0.009, 0.01])
    lines = path.to_csv(tmp_path / "path.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,t,re_m,im_m,re_G_0,im_G_0"
    assert len(lines) == 6
    assert len(simulate_paths(start, 0.1j, (0,), 0.01, 2, 3, rng)) == 3


def test_drift_residual_detects_missing_drift(rng: np.random.Generator) -> None:
    paths = synthetic_paths(rng, 200, 0.01)
    with_drift = drift_residual(paths)
    without = drift_residual(paths, include_drift=False)
    assert with_drift.statistic < 5.0
    assert without.statistic > 50.0
    assert not without.include_drift
    with pytest.raises(InvalidParameter):
        drift_residual(paths[:1])


def test_qv_check_on_synthetic_path(rng: np.random.Generator) -> None:
    (path,) = synthetic_paths(rng, 1, 0.0)
    path.m_path = [0j] * 11
    path.g_paths = [np.array([1j + 0.1 * (k % 2)]) for k in range(11)]
    result = qv_check(path, 0)
    assert result.realized == pytest.approx(10 * 0.01)
    assert result.predicted == pytest.approx(1.0 / (4 * 0.25))
    assert result.ratio == pytest.approx(0.1)
    with pytest.raises(InvalidParameter):
        qv_check(path, 3)


def test_qv_ratio_on_simulated_paths(rng: np.random.Generator) -> None:
    start = FlowState.from_diagonal(np.linspace(-1.0, 1.0, 40))
    paths = simulate_paths(start, 0.2 + 0.1j, (0,), 0.01, 40, 30, rng)
    ratios = [qv_check(path, 0).ratio for path in paths]
    assert 0.7 <= float(np.mean(ratios)) <= 1.4


def test_stopping_time_inputs(rng: np.random.Generator) -> None:
    diagonal = np.linspace(-1.0, 1.0, 20)
    z = complex(0.0, 1.0 / 20)
    assert stopping_time_experiment(diagonal, 0.0, z, 5, rng) == 0.0
    with pytest.raises(InvalidParameter):
        stopping_time_experiment(diagonal, 0.01, 0.1j, 5, rng)
    fraction = stopping_time_experiment(diagonal, 0.01, z, 3, rng, steps=5)
    assert 0.0 <= fraction <= 1.0
    assert math.isfinite(fraction)


def test_flow_endpoint_spectra(rng: np.random.Generator) -> None:
    diagonal = np.linspace(-1.0, 1.0, 8)
    spectra = flow_endpoint_spectra(FlowState.from_diagonal(diagonal), 1e-6, 4, 3, rng)
    assert len(spectra) == 3
    for eigenvalues in spectra:
        assert eigenvalues.shape == (8,)
        assert np.allclose(np.sort(eigenvalues), diagonal, atol=1e-2)


def test_stopping_probability_vanishes_for_large_thresholds(rng: np.random.Generator) -> None:
    diagonal = np.linspace(-1.0, 1.0, 20)
    z = complex(0.0, 1.0 / 20)
    low = stopping_time_experiment(diagonal, 0.01, z, 4, rng, threshold=0.25, steps=5)
    high = stopping_time_experiment(diagonal, 0.01, z, 4, rng, threshold=1e6, steps=5)
    assert low == 1.0
    assert high == 0.0


def test_predicted_variation_below_crude_bound(rng: np.random.Generator) -> None:
    n = 10
    t_final = 0.01
    start = FlowState.from_diagonal(np.linspace(-1.0, 1.0, n))
    path = simulate_path(start, complex(0.2, 1.0 / n), (0, 4), t_final, 10, rng)
    for x in (0, 4):
        qv = qv_check(path, x)
        assert qv.bound == pytest.approx(t_final * n**3)
        assert 0.0 <= qv.predicted <= qv.bound
        assert qv.realized >= 0.0


def test_euler_bias_is_first_order(rng: np.random.Generator) -> None:
    start = FlowState.from_diagonal(np.linspace(-1.0, 1.0, 20))
    ratio = euler_order_ratio(start, complex(0.3, 0.5), 0.04, 4000, rng)
    assert 0.3 <= ratio <= 0.7


def test_euler_bias_validation(rng: np.random.Generator) -> None:
    start = FlowState.from_diagonal([0.0, 1.0])
    with pytest.raises(InvalidParameter):
        euler_bias(start, 0.5j, (0.01,), 0, rng)
    with pytest.raises(InvalidParameter):
        euler_bias(start, 0.5 + 0j, (0.01,), 5, rng)
    with pytest.raises(InvalidParameter):
        euler_bias(start, 0.5j, (0.01, -0.01), 5, rng)
    assert euler_bias(start, 0.5j, (0.01, 0.005), 3, rng).shape == (2,)


def test_path_csv_into_missing_directory(tmp_path: Path, rng: np.random.Generator) -> None:
    path = simulate_path(FlowState.from_diagonal([0.0, 1.0]), 0.5j, (0,), 0.01, 2, rng)
    written = path.to_csv(tmp_path / "path.csv")
    assert written.read_text(encoding="utf-8").startswith("step,t,re_m,im_m,re_G_0,im_G_0\n")
    with pytest.raises(ArtifactError):
        path.to_csv(tmp_path / "missing" / "path.csv")
