"""GUE sampling, the Hermitian eigensolver contract and eigenvector overlap statistics."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, stats

from .errors import ArtifactError, EigDidNotConverge, EmptyWindow, InvalidParameter
from .torus_spectrum import TorusSpec, all_eigenvalues

LOG = logging.getLogger(__name__)

MAX_DIM = 4096
DEFAULT_RTOL = 1e-9
CHECK_ENV = "TORUS_LAB_CHECK_EIG"


def is_hermitian(matrix: ArrayLike) -> bool:
    """Exact equality with the conjugate transpose."""

    values = np.asarray(matrix)
    return values.ndim == 2 and values.shape[0] == values.shape[1] and bool(
        np.array_equal(values, values.conj().T)
    )


def gue_sample(dim: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """W = M + M^* with M i.i.d. complex Gaussian of variance 1/(2N).

    Entries of W have variance 1/N.
    """

    if dim < 1:
        raise InvalidParameter(f"dimension must be positive, got {dim}")
    scale = math.sqrt(1.0 / (4.0 * dim))
    m = scale * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return m + m.conj().T


def haar_unitary(dim: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    return np.asarray(stats.unitary_group.rvs(dim, random_state=rng), dtype=np.complex128)


def torus_diagonal(spec: TorusSpec) -> NDArray[np.complex128]:
    """A_{c,d} in its Fourier eigenbasis."""

    return np.diag(all_eigenvalues(spec)).astype(np.complex128)


def perturb(
    matrix: NDArray[np.complex128], t: float, rng: np.random.Generator
) -> NDArray[np.complex128]:
    """A + sqrt(t) W with W drawn from the GUE of matching dimension."""

    if t < 0.0:
        raise InvalidParameter(f"t must be non-negative, got {t}")
    if t == 0.0:
        return np.array(matrix, dtype=np.complex128, copy=True)
    return matrix + math.sqrt(t) * gue_sample(matrix.shape[0], rng)


# ----------------------------------------------------------------------
# Eigensolver
# ----------------------------------------------------------------------
@dataclass(slots=True)
class EigenSystem:
    """Ascending eigenvalues with orthonormal eigenvectors as columns."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)

    def stieltjes(self, z: ArrayLike) -> NDArray[np.complex128] | complex:
        """m(z) = (1/N) sum_k 1 / (lambda_k - z)."""

        zs = np.asarray(z, dtype=np.complex128)
        values = np.mean(1.0 / (self.eigenvalues[None, :] - zs.reshape(-1, 1)), axis=1)
        return complex(values[0]) if zs.ndim == 0 else values.reshape(zs.shape)


def checks_enabled() -> bool:
    return os.environ.get(CHECK_ENV, "") == "1"


def hermitian_eig(
    matrix: NDArray[np.complex128], rtol: float = DEFAULT_RTOL, *, check: bool | None = None
) -> EigenSystem:
    """Full eigendecomposition of a Hermitian matrix.

    With ``check`` (default: ``TORUS_LAB_CHECK_EIG=1``) the residual
    ||H v - lambda v|| / ||H|| and the orthogonality defect are verified
    against ``rtol``.

    Raises:
        InvalidParameter: if the matrix is not square or exceeds the desk-scale cap.
        EigDidNotConverge: on solver failure or a violated contract.
    """

    values = np.asarray(matrix)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvalidParameter(f"expected a square matrix, got shape {values.shape}")
    if values.shape[0] > MAX_DIM:
        raise InvalidParameter(f"dimension {values.shape[0]} exceeds the cap {MAX_DIM}")
    try:
        eigenvalues, eigenvectors = linalg.eigh(values)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigDidNotConverge(math.nan, f"eigensolver failed: {exc}") from exc
    system = EigenSystem(
        np.asarray(eigenvalues, dtype=np.float64), eigenvectors.astype(np.complex128)
    )
    if check is None:
        check = checks_enabled()
    if check:
        _verify(values, system, rtol)
    return system


def _verify(matrix: NDArray[Any], system: EigenSystem, rtol: float) -> None:
    scale = max(float(np.max(np.abs(system.eigenvalues), initial=0.0)), 1.0)
    vectors = system.eigenvectors
    residual = float(
        np.max(np.linalg.norm(matrix @ vectors - vectors * system.eigenvalues, axis=0), initial=0.0)
    )
    if residual > rtol * scale:
        raise EigDidNotConverge(residual / scale)
    defect = float(np.max(np.abs(vectors.conj().T @ vectors - np.eye(system.dim)), initial=0.0))
    if defect > rtol * max(1.0, math.sqrt(system.dim)):
        raise EigDidNotConverge(defect, f"eigenvectors not orthonormal (defect {defect:.3e})")


# ----------------------------------------------------------------------
# Spectral windows and overlaps
# ----------------------------------------------------------------------
@dataclass(slots=True)
class WindowedEigenpairs:
    """Eigenpairs in a window; vectors carry independent uniform phases and norm ``norm_scale``."""

    indices: NDArray[np.int64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]
    norm_scale: float

    def __len__(self) -> int:
        return int(self.indices.size)


def window_eigenpairs(
    system: EigenSystem,
    interval: tuple[float, float],
    norm_scale: float,
    rng: np.random.Generator,
) -> WindowedEigenpairs:
    """All eigenpairs with eigenvalue in the half-open ``[lo, hi)``.

    Raises:
        EmptyWindow: if no eigenvalue falls inside.
    """

    lo, hi = interval
    if not lo < hi:
        raise InvalidParameter(f"empty interval [{lo}, {hi})")
    indices = np.flatnonzero((system.eigenvalues >= lo) & (system.eigenvalues < hi))
    if indices.size == 0:
        raise EmptyWindow(f"no eigenvalues in [{lo}, {hi})")
    phases = np.exp(2j * np.pi * rng.random(indices.size))
    vectors = system.eigenvectors[:, indices]
    vectors = vectors / np.linalg.norm(vectors, axis=0) * phases * norm_scale
    return WindowedEigenpairs(
        indices=indices,
        eigenvalues=system.eigenvalues[indices],
        eigenvectors=vectors,
        norm_scale=norm_scale,
    )


def overlap_matrix(start: EigenSystem, end: EigenSystem) -> NDArray[np.complex128]:
    """v[k, j] = <u_{j,0}, u_{k,t}>: row k expresses the k-th perturbed vector in the old basis."""

    if start.dim != end.dim:
        raise InvalidParameter(f"dimension mismatch {start.dim} vs {end.dim}")
    return (start.eigenvectors.conj().T @ end.eigenvectors).T


@dataclass(slots=True)
class ConcentrationResult:
    lhs: float
    k_size: int
    k2_size: int
    b: int

    @property
    def bound(self) -> float:
        """|K| / b, the leading term of the lower bound."""

        return self.k_size / self.b if self.b else 0.0

    def as_dict(self) -> dict[str, float | int]:
        return {
            "lhs": self.lhs,
            "k_size": self.k_size,
            "k2_size": self.k2_size,
            "b": self.b,
            "bound": self.bound,
        }


def concentration_statistic(
    start: EigenSystem,
    end: EigenSystem,
    e_lower: float,
    e_upper: float,
    t: float,
) -> ConcentrationResult:
    """Average overlap mass of perturbed eigenvectors on nearby stable unperturbed ones.

    K holds the j with lambda_{j,0} in [E_l + 1/N, E_u - 1/N] and
    |m(lambda_{j,0} + i/N)| <= (N t)^(-1/2); K2 the k with lambda_{k,t} in
    [E_l, E_u]; b counts lambda_{k,0} in [E_l - 3 sqrt(t), E_u + 3 sqrt(t)].

    Raises:
        EmptyWindow: if K2 is empty.
    """

    n = start.dim
    if t < 0.0 or (0.0 < t < math.exp(-math.sqrt(n))):
        raise InvalidParameter(f"t={t} below exp(-sqrt(N)) for N={n}")
    old = start.eigenvalues
    new = end.eigenvalues
    candidates = np.flatnonzero((old >= e_lower + 1.0 / n) & (old <= e_upper - 1.0 / n))
    if t > 0.0 and candidates.size:
        m = np.asarray(start.stieltjes(old[candidates] + 1j / n))
        candidates = candidates[np.abs(m) <= (n * t) ** -0.5]
    k2 = np.flatnonzero((new >= e_lower) & (new <= e_upper))
    if k2.size == 0:
        raise EmptyWindow(f"no perturbed eigenvalues in [{e_lower}, {e_upper}]")
    reach = 3.0 * math.sqrt(t)
    b = int(np.count_nonzero((old >= e_lower - reach) & (old <= e_upper + reach)))
    overlaps = overlap_matrix(start, end)[np.ix_(k2, candidates)]
    close = np.abs(new[k2][:, None] - old[candidates][None, :]) < 1.0 / n
    lhs = float(np.sum(np.abs(overlaps) ** 2 * close) / k2.size)
    return ConcentrationResult(lhs=lhs, k_size=int(candidates.size), k2_size=int(k2.size), b=b)


def eigenvector_projection_samples(
    diagonal: ArrayLike,
    t: float,
    q: ArrayLike,
    k: int,
    draws: int,
    rng: np.random.Generator,
) -> NDArray[np.complex128]:
    """sqrt(n) <q, u_k> for u_k the k-th (1-based) eigenvector of D + sqrt(t) W.

    Each eigenvector gets a uniform random phase.
    """

    d = np.asarray(diagonal, dtype=np.float64)
    vector = np.asarray(q, dtype=np.complex128)
    n = d.size
    if not 1 <= k <= n:
        raise InvalidParameter(f"k={k} outside [1, {n}]")
    base = np.diag(d).astype(np.complex128)
    samples = np.empty(draws, dtype=np.complex128)
    for index in range(draws):
        matrix = perturb(base, t, rng)
        try:
            _, vectors = linalg.eigh(matrix, subset_by_index=[k - 1, k - 1])
        except linalg.LinAlgError as exc:
            raise EigDidNotConverge(math.nan, f"eigensolver failed: {exc}") from exc
        phase = np.exp(2j * np.pi * rng.random())
        samples[index] = math.sqrt(n) * phase * np.vdot(vector, vectors[:, 0])
    return samples


# ----------------------------------------------------------------------
# Persistence
# ----------------------------------------------------------------------
def save_matrix(path: Path, matrix: ArrayLike, metadata: dict[str, Any] | None = None) -> Path:
    """``<path>``: int64 dimension then row-major complex128 (little-endian); ``.json`` metadata."""

    values = np.asarray(matrix, dtype="<c16")
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvalidParameter("only square matrices are persisted")
    try:
        with path.open("wb") as handle:
            handle.write(np.asarray([values.shape[0]], dtype="<i8").tobytes())
            handle.write(np.ascontiguousarray(values).tobytes())
        meta = {"dim": values.shape[0], **(metadata or {})}
        path.with_suffix(".json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise ArtifactError(f"cannot write matrix to {path}: {exc}") from exc
    return path


def load_matrix(path: Path) -> tuple[NDArray[np.complex128], dict[str, Any]]:
    try:
        raw = path.read_bytes()
        sidecar = path.with_suffix(".json")
        meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    except OSError as exc:
        raise ArtifactError(f"cannot read matrix from {path}: {exc}") from exc
    dim = int(np.frombuffer(raw[:8], dtype="<i8")[0])
    data = np.frombuffer(raw[8:], dtype="<c16")
    if data.size != dim * dim:
        raise ArtifactError(f"{path} holds {data.size} entries, expected {dim * dim}")
    return data.reshape(dim, dim).astype(np.complex128), meta
