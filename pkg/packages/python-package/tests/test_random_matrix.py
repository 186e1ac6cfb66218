from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from torus_lab import random_matrix
from torus_lab.errors import ArtifactError, EigDidNotConverge, EmptyWindow, InvalidParameter
from torus_lab.random_matrix import (
    EigenSystem,
    concentration_statistic,
    eigenvector_projection_samples,
    gue_sample,
    haar_unitary,
    hermitian_eig,
    is_hermitian,
    load_matrix,
    overlap_matrix,
    perturb,
    save_matrix,
    torus_diagonal,
    window_eigenpairs,
)
from torus_lab.torus_spectrum import TorusSpec, all_eigenvalues


def test_gue_is_hermitian_with_entry_variance(rng: np.random.Generator) -> None:
    dim = 8
    draws = np.stack([gue_sample(dim, rng) for _ in range(10_000)])
    assert is_hermitian(draws[0])
    off_diagonal = ~np.eye(dim, dtype=bool)
    variance = np.mean(np.abs(draws[:, off_diagonal]) ** 2)
    assert variance == pytest.approx(1.0 / dim, rel=0.05)


def test_gue_norm_near_two(rng: np.random.Generator) -> None:
    norms = [np.max(np.abs(np.linalg.eigvalsh(gue_sample(200, rng)))) for _ in range(4)]
    assert all(1.8 <= value <= 2.2 for value in norms)


@pytest.mark.slow()
def test_gue_norm_at_512(rng: np.random.Generator) -> None:
    norms = np.array([np.max(np.abs(np.linalg.eigvalsh(gue_sample(512, rng)))) for _ in range(20)])
    assert np.all(norms < 3.0)
    assert 1.8 <= norms.mean() <= 2.1


def test_haar_unitary(rng: np.random.Generator) -> None:
    u = haar_unitary(6, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-12)


def test_perturb(rng: np.random.Generator) -> None:
    base = np.diag([1.0, 2.0, 3.0]).astype(np.complex128)
    copy = perturb(base, 0.0, rng)
    np.testing.assert_array_equal(copy, base)
    assert copy is not base
    assert is_hermitian(perturb(base, 0.1, rng))
    with pytest.raises(InvalidParameter):
        perturb(base, -1.0, rng)


def test_hermitian_eig_contract(rng: np.random.Generator) -> None:
    matrix = gue_sample(30, rng)
    system = hermitian_eig(matrix, check=True)
    assert np.all(np.diff(system.eigenvalues) >= 0.0)
    residual = matrix @ system.eigenvectors - system.eigenvectors * system.eigenvalues
    assert np.max(np.abs(residual)) <= 1e-8


def test_hermitian_eig_errors(monkeypatch: pytest.MonkeyPatch) -> None:
    with pytest.raises(InvalidParameter):
        hermitian_eig(np.zeros((2, 3)))
    with pytest.raises(EigDidNotConverge):
        hermitian_eig(np.full((3, 3), np.nan))
    monkeypatch.setattr(random_matrix, "MAX_DIM", 4)
    with pytest.raises(InvalidParameter):
        hermitian_eig(np.eye(5))


def test_torus_diagonal_spectrum() -> None:
    spec = TorusSpec(5, 0.2, 0.7)
    system = hermitian_eig(torus_diagonal(spec))
    np.testing.assert_allclose(system.eigenvalues, np.sort(all_eigenvalues(spec)), atol=1e-12)


def test_window_is_half_open(rng: np.random.Generator) -> None:
    system = EigenSystem(np.array([0.0, 1.0, 2.0]), np.eye(3, dtype=np.complex128))
    pairs = window_eigenpairs(system, (0.0, 2.0), 4.0, rng)
    np.testing.assert_array_equal(pairs.indices, [0, 1])
    np.testing.assert_allclose(np.linalg.norm(pairs.eigenvectors, axis=0), 4.0)
    with pytest.raises(EmptyWindow):
        window_eigenpairs(system, (2.5, 3.0), 1.0, rng)


def test_overlap_with_itself_is_identity(rng: np.random.Generator) -> None:
    system = hermitian_eig(gue_sample(12, rng))
    np.testing.assert_allclose(np.abs(overlap_matrix(system, system)), np.eye(12), atol=1e-10)


def test_concentration_without_noise_is_exact() -> None:
    spec = TorusSpec(8, 0.31, 0.62)
    eigenvalues = np.sort(all_eigenvalues(spec))
    system = EigenSystem(eigenvalues, np.eye(eigenvalues.size, dtype=np.complex128))
    result = concentration_statistic(system, system, 0.5, 1.5, 0.0)
    assert result.k2_size > 0
    assert result.lhs == result.bound


def test_concentration_rejects_tiny_time(rng: np.random.Generator) -> None:
    system = hermitian_eig(gue_sample(4, rng))
    with pytest.raises(InvalidParameter):
        concentration_statistic(system, system, -1.0, 1.0, 0.01)


def test_projection_without_noise_picks_basis_vector(rng: np.random.Generator) -> None:
    diagonal = np.linspace(-1.0, 1.0, 10)
    q = np.zeros(10)
    q[3] = 1.0
    samples = eigenvector_projection_samples(diagonal, 1e-12, q, 4, 3, rng)
    np.testing.assert_allclose(np.abs(samples), math.sqrt(10), rtol=1e-6)


def test_matrix_persistence(tmp_path: Path, rng: np.random.Generator) -> None:
    matrix = gue_sample(5, rng)
    path = save_matrix(tmp_path / "w.bin", matrix, {"seed": 3})
    assert int(np.frombuffer(path.read_bytes()[:8], dtype="<i8")[0]) == 5
    loaded, meta = load_matrix(path)
    np.testing.assert_array_equal(loaded, matrix)
    assert meta == {"dim": 5, "seed": 3}
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ArtifactError):
        load_matrix(path)
