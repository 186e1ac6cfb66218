"""Finitely supported complex measures on the real line."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidParameter
from .lab.artifacts import write_csv

# Rows of the (lambda x atoms) kernel block evaluated at once.
_BLOCK = 256


@dataclass(slots=True)
class AtomicMeasure:
    """Atoms ``(locations[i], weights[i])``; weights may be complex."""

    locations: NDArray[np.float64]
    weights: NDArray[np.complex128]

    def __post_init__(self) -> None:
        self.locations = np.asarray(self.locations, dtype=np.float64).ravel()
        self.weights = np.asarray(self.weights, dtype=np.complex128).ravel()
        if self.locations.shape != self.weights.shape:
            raise InvalidParameter(
                f"{self.locations.size} locations but {self.weights.size} weights"
            )

    @classmethod
    def point_mass(cls, location: float = 0.0, weight: complex = 1.0) -> AtomicMeasure:
        return cls(np.array([location]), np.array([weight]))

    @classmethod
    def empirical(cls, values: ArrayLike) -> AtomicMeasure:
        """Uniform probability measure on ``values``."""

        points = np.asarray(values, dtype=np.float64).ravel()
        if points.size == 0:
            raise InvalidParameter("empirical measure needs at least one point")
        return cls(points, np.full(points.size, 1.0 / points.size))

    def __len__(self) -> int:
        return int(self.locations.size)

    # ------------------------------------------------------------------
    # Mass and structure
    # ------------------------------------------------------------------
    @property
    def total_weight(self) -> complex:
        return complex(np.sum(self.weights))

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.weights.imag == 0.0))

    def is_probability(self, atol: float = 1e-12) -> bool:
        return (
            self.is_real
            and bool(np.all(self.weights.real >= 0.0))
            and abs(self.total_weight - 1.0) <= atol
        )

    def absolute(self) -> AtomicMeasure:
        """The variation measure |ν|."""

        return AtomicMeasure(self.locations.copy(), np.abs(self.weights).astype(np.complex128))

    def sorted(self) -> AtomicMeasure:
        """Canonical order: by location, then real and imaginary weight."""

        order = np.lexsort((self.weights.imag, self.weights.real, self.locations))
        return AtomicMeasure(self.locations[order], self.weights[order])

    def convolve(self, other: AtomicMeasure) -> AtomicMeasure:
        """Atoms at pairwise sums of locations with products of weights.

        The atom for ``(i, j)`` sits at index ``i * len(other) + j``.
        """

        locations = (self.locations[:, None] + other.locations[None, :]).ravel()
        weights = (self.weights[:, None] * other.weights[None, :]).ravel()
        return AtomicMeasure(locations, weights)

    def mass(self, lo: float, hi: float) -> complex:
        """Total weight of atoms in the closed interval [lo, hi]."""

        inside = (self.locations >= lo) & (self.locations <= hi)
        return complex(np.sum(self.weights[inside]))

    def integrate(self, func: Callable[[NDArray[np.float64]], ArrayLike]) -> complex:
        return complex(np.sum(self.weights * func(self.locations)))

    # ------------------------------------------------------------------
    # Transforms
    # ------------------------------------------------------------------
    def stieltjes(self, z: ArrayLike) -> NDArray[np.complex128] | complex:
        """Σ w_i / (x_i - z), vectorized over ``z``."""

        zs = np.asarray(z, dtype=np.complex128)
        flat = zs.ravel()
        out = np.empty(flat.shape, dtype=np.complex128)
        for start in range(0, flat.size, _BLOCK):
            block = flat[start : start + _BLOCK]
            out[start : start + _BLOCK] = (
                1.0 / (self.locations[None, :] - block[:, None])
            ) @ self.weights
        if zs.ndim == 0:
            return complex(out[0])
        return out.reshape(zs.shape)

    def smooth(
        self, eta: float, lam: ArrayLike, *, prune_tol: float | None = None
    ) -> NDArray | float | complex:
        """Cauchy smoothing Σ w_i η / ((x_i - λ)² + η²).

        With ``prune_tol`` atoms farther than ``η / sqrt(prune_tol)`` from a
        block of abscissae are skipped; the absolute error is then at most
        ``total_variation * prune_tol / η``.
        """

        if eta <= 0.0:
            raise InvalidParameter(f"eta must be positive, got {eta}")
        lams = np.asarray(lam, dtype=np.float64)
        flat = lams.ravel()
        real = self.is_real
        weights = self.weights.real if real else self.weights
        locations = self.locations
        if prune_tol is not None:
            order = np.argsort(locations, kind="stable")
            locations = locations[order]
            weights = weights[order]
            reach = eta / np.sqrt(prune_tol)
        out = np.empty(flat.shape, dtype=np.float64 if real else np.complex128)
        eta_sq = eta * eta
        for start in range(0, flat.size, _BLOCK):
            block = flat[start : start + _BLOCK]
            atoms, w = locations, weights
            if prune_tol is not None and block.size:
                lo = np.searchsorted(locations, block.min() - reach, side="left")
                hi = np.searchsorted(locations, block.max() + reach, side="right")
                atoms, w = locations[lo:hi], weights[lo:hi]
            diff = atoms[None, :] - block[:, None]
            out[start : start + _BLOCK] = (eta / (diff * diff + eta_sq)) @ w
        if lams.ndim == 0:
            return out[0].item()
        return out.reshape(lams.shape)

    # ------------------------------------------------------------------
    # Export
    # ------------------------------------------------------------------
    def to_csv(self, path: Path) -> Path:
        rows = (
            (float(x), float(w.real), float(w.imag))
            for x, w in zip(self.locations, self.weights, strict=True)
        )
        return write_csv(path, ["location", "re_weight", "im_weight"], rows)
