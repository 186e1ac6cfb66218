"""Gaussian wave at energy E restricted to a square window of the lattice."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import CovarianceNotPSD, InvalidParameter
from .lab.artifacts import write_csv, write_json
from .spectral_density import DEFAULT_TOL, rho_table

LOG = logging.getLogger(__name__)

# Fields are complex arrays of shape (side, side) indexed [x + w, y + w].
ComplexField = NDArray[np.complex128]


@dataclass(frozen=True, slots=True)
class Window:
    """Offsets (x, y) with |x|, |y| <= half_width in row-major order."""

    half_width: int

    def __post_init__(self) -> None:
        if self.half_width < 0:
            raise InvalidParameter(f"window half-width must be >= 0, got {self.half_width}")

    @property
    def side(self) -> int:
        return 2 * self.half_width + 1

    @property
    def size(self) -> int:
        return self.side * self.side

    @property
    def offsets(self) -> NDArray[np.int64]:
        span = np.arange(-self.half_width, self.half_width + 1)
        xs, ys = np.meshgrid(span, span, indexing="ij")
        return np.stack([xs.ravel(), ys.ravel()], axis=1)

    def index(self, x: int, y: int) -> int:
        w = self.half_width
        if abs(x) > w or abs(y) > w:
            raise InvalidParameter(f"offset ({x}, {y}) outside window of half-width {w}")
        return (x + w) * self.side + (y + w)


@dataclass(slots=True)
class WindowCovariance:
    """M(p, q) = rho_{p-q}(E) / rho_{0,0}(E) over a window."""

    energy: float
    window: Window
    entries: NDArray[np.float64]
    tol: float = DEFAULT_TOL
    min_eigenvalue: float = 0.0

    @property
    def clip(self) -> float:
        return 10.0 * self.tol

    def square_root(self) -> NDArray[np.float64]:
        """Symmetric PSD square root; eigenvalues in [-10 tol, 0) are clipped to 0.

        Raises:
            CovarianceNotPSD: if an eigenvalue lies below -10 tol.
        """

        eigenvalues, vectors = np.linalg.eigh(self.entries)
        smallest = float(eigenvalues[0])
        if smallest < -self.clip:
            raise CovarianceNotPSD(smallest, self.clip)
        if smallest < 0.0:
            LOG.debug("clipping %d negative covariance eigenvalues", int(np.sum(eigenvalues < 0.0)))
        root = np.sqrt(np.clip(eigenvalues, 0.0, None))
        return (vectors * root) @ vectors.T

    def to_csv(self, path: Path) -> Path:
        """Write M(p, 0) as ``dx,dy,re,im`` plus a JSON sidecar with E, w and tol."""

        centre = self.window.index(0, 0)
        column = self.entries[:, centre]
        rows = (
            (int(dx), int(dy), float(value), 0.0)
            for (dx, dy), value in zip(self.window.offsets, column, strict=True)
        )
        write_csv(path, ["dx", "dy", "re", "im"], rows)
        _write_sidecar(path, self.energy, self.window.half_width, self.tol)
        return path


def _write_sidecar(path: Path, energy: float, half_width: int, tol: float) -> None:
    meta = {"energy": energy, "half_width": half_width, "tol": tol}
    write_json(path.with_suffix(".json"), meta)


def offset_correlations(energy: float, reach: int, tol: float = DEFAULT_TOL) -> NDArray[np.float64]:
    """R[|a|, |b|] = rho_{a,b}(E) / rho_{0,0}(E) for 0 <= |a|, |b| <= reach."""

    if not (-4.0 < energy < 4.0) or energy == 0.0:
        raise InvalidParameter(f"energy must lie in (-4, 4) without 0, got {energy}")
    # rho is computed well below tol so that quadrature noise stays inside the PSD clip.
    table = rho_table(reach, reach, energy, max(tol * 1e-3, 1e-13))
    return table / table[0, 0]


def wave_covariance(energy: float, window: Window, tol: float = DEFAULT_TOL) -> WindowCovariance:
    """Covariance of the Gaussian wave Z_E on ``window``.

    Raises:
        InvalidParameter: if E = 0 or |E| >= 4.
    """

    w = window.half_width
    correlations = offset_correlations(energy, 2 * w, tol)
    offsets = window.offsets
    dx = np.abs(offsets[:, None, 0] - offsets[None, :, 0])
    dy = np.abs(offsets[:, None, 1] - offsets[None, :, 1])
    entries = correlations[dx, dy]
    smallest = float(np.linalg.eigvalsh(entries)[0])
    if smallest < 0.0:
        LOG.info("wave covariance at E=%g, w=%d has smallest eigenvalue %.2e", energy, w, smallest)
    return WindowCovariance(
        energy=energy, window=window, entries=entries, tol=tol, min_eigenvalue=smallest
    )


def sample_wave(
    covariance: WindowCovariance, count: int, rng: np.random.Generator
) -> NDArray[np.complex128]:
    """Draw ``count`` fields Z = L (g1 + i g2) / sqrt(2); shape (count, side, side)."""

    if count < 1:
        raise InvalidParameter(f"count must be positive, got {count}")
    root = covariance.square_root()
    size = covariance.window.size
    noise = rng.standard_normal((count, size)) + 1j * rng.standard_normal((count, size))
    fields = (noise @ root.T) / np.sqrt(2.0)
    side = covariance.window.side
    return fields.reshape(count, side, side)


def _as_rows(fields: ArrayLike) -> NDArray[np.complex128]:
    values = np.asarray(fields, dtype=np.complex128)
    if values.ndim == 2:
        values = values[None, ...]
    if values.ndim != 3 or values.shape[0] == 0:
        raise InvalidParameter("expected a non-empty stack of fields")
    return values.reshape(values.shape[0], -1)


def empirical_covariance(fields: ArrayLike) -> NDArray[np.complex128]:
    """M_hat(p, q) = mean_i Z_i(p) conj(Z_i(q)).

    ``fields`` is a stack (count, side, side); a single field is a stack of one.
    """

    rows = _as_rows(fields)
    return (rows.T @ rows.conj()) / rows.shape[0]


def covariance_distance(
    estimate: ArrayLike | WindowCovariance, target: ArrayLike | WindowCovariance
) -> tuple[float, float]:
    """(max entrywise |difference|, ||difference||_F / ||target||_F)."""

    lhs = np.asarray(estimate.entries if isinstance(estimate, WindowCovariance) else estimate)
    rhs = np.asarray(target.entries if isinstance(target, WindowCovariance) else target)
    if lhs.shape != rhs.shape:
        raise InvalidParameter(f"shape mismatch {lhs.shape} vs {rhs.shape}")
    diff = lhs - rhs
    return float(np.max(np.abs(diff))), float(np.linalg.norm(diff) / np.linalg.norm(rhs))


def entry_correlation(estimate: ArrayLike, target: ArrayLike) -> float:
    """Pearson correlation between Re(M_hat) and M over all entries."""

    lhs = np.real(np.asarray(estimate)).ravel()
    rhs = np.real(np.asarray(target)).ravel()
    return float(np.corrcoef(lhs, rhs)[0, 1])


def eigen_residual(fields: ArrayLike, energy: float) -> NDArray[np.complex128]:
    """Sum of the four neighbours minus E Z at interior window points."""

    values = np.asarray(fields, dtype=np.complex128)
    if values.ndim == 2:
        values = values[None, ...]
    neighbours = (
        values[:, 2:, 1:-1] + values[:, :-2, 1:-1] + values[:, 1:-1, 2:] + values[:, 1:-1, :-2]
    )
    return neighbours - energy * values[:, 1:-1, 1:-1]


def field_to_csv(
    field: ArrayLike, path: Path, *, energy: float, tol: float = DEFAULT_TOL
) -> Path:
    """Write one field as ``dx,dy,re,im`` rows with a JSON sidecar."""

    values = np.asarray(field, dtype=np.complex128)
    if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] % 2 == 0:
        raise InvalidParameter("field must be a square window of odd side")
    window = Window(values.shape[0] // 2)
    rows = (
        (int(dx), int(dy), float(value.real), float(value.imag))
        for (dx, dy), value in zip(window.offsets, values.ravel(), strict=True)
    )
    write_csv(path, ["dx", "dy", "re", "im"], rows)
    _write_sidecar(path, energy, window.half_width, tol)
    return path
