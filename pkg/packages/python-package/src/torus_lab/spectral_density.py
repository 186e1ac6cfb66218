"""Spectral densities of the lattice Z and Z^2, Cauchy smoothing and the bounds built on them.

``d_a(t) = T_|a|(t/2) / (pi sqrt(4 - t^2))`` on (-2, 2) is the spectral
measure of the line at offset ``a``; ``rho_{a,b} = d_a * d_b`` is the one of
the square lattice at offset ``(a, b)``.  ``rho_{0,0}`` has a logarithmic
singularity at 0 and a jump at +-4.

The convolution is evaluated after substituting ``theta = 2 cos(s)``, which
turns ``d_a(theta) d theta`` into ``cos(a s) ds / pi`` on [0, pi].  For
``0 < lam < 4`` the remaining factor is supported on ``s in [0, alpha]`` with
``alpha = arccos((lam - 2) / 2)`` and

    4 - (lam - 2 cos s)^2 = 4 sin((alpha - s)/2) sin((alpha + s)/2) * (lam + 4 sin^2(s/2)),

so both near-singular factors are computed from exact endpoint distances.
Negative ``lam`` follows from ``rho_{a,b}(-lam) = (-1)^(a+b) rho_{a,b}(lam)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import overload

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from .errors import InvalidParameter, SingularAbscissa
from .lab.artifacts import write_csv, write_json
from .measures import AtomicMeasure
from .quadrature import T_MAX, tanh_sinh, tanh_sinh_rule

LOG = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
GRID_CLAMP = 1e-3
ANGLE_TABLE_SIZE = 4096
NORM_CUTOFF = 1e6
# Below this abscissa the contribution of the log singularity to an integral is < 1e-11.
_LOG_CUTOFF = 1e-12


@dataclass(frozen=True, slots=True)
class OffsetPair:
    """Lattice offset ``(a, b)`` of the square-lattice density rho_{a,b}."""

    a: int
    b: int

    def canonical(self) -> OffsetPair:
        """Representative under the symmetries a <-> -a, b <-> -b, a <-> b."""

        lo, hi = sorted((abs(self.a), abs(self.b)))
        return OffsetPair(lo, hi)


@dataclass(frozen=True, slots=True)
class CauchyKernel:
    """kappa_eta(x) = eta / (x^2 + eta^2); integrates to pi."""

    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0.0:
            raise InvalidParameter(f"eta must be positive, got {self.eta}")

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        values = np.asarray(x, dtype=np.float64)
        return self.eta / (values * values + self.eta * self.eta)


@dataclass(frozen=True, slots=True)
class AnglePair:
    """Angles with 2 cos(alpha) + 2 cos(beta) = E; scalars or equal-shape arrays."""

    alpha: NDArray[np.float64]
    beta: NDArray[np.float64]


@dataclass(slots=True)
class DensityGrid:
    """A real density tabulated on a strictly increasing grid."""

    grid: NDArray[np.float64]
    values: NDArray[np.float64]
    singular_points: list[float] = field(default_factory=list)
    tol: float = DEFAULT_TOL
    label: str = ""
    offsets: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise InvalidParameter("grid and values must be 1-D arrays of equal length")
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0.0):
            raise InvalidParameter("grid must be strictly increasing")

    def integral(self) -> float:
        return float(integrate.trapezoid(self.values, self.grid))

    def to_measure(self) -> AtomicMeasure:
        """Trapezoid weights as atoms, normalized to total mass one."""

        spacing = np.diff(self.grid)
        weights = np.zeros_like(self.values)
        weights[:-1] += 0.5 * spacing * self.values[:-1]
        weights[1:] += 0.5 * spacing * self.values[1:]
        total = weights.sum()
        if total <= 0.0:
            raise InvalidParameter("density grid has no positive mass")
        return AtomicMeasure(self.grid.copy(), weights / total)

    def to_csv(self, path: Path) -> Path:
        """Write ``lambda,value`` rows plus a JSON sidecar next to ``path``."""

        rows = ((float(x), float(v)) for x, v in zip(self.grid, self.values, strict=True))
        write_csv(path, ["lambda", "value"], rows)
        a, b = self.offsets if self.offsets is not None else (None, None)
        sidecar = {
            "a": a,
            "b": b,
            "label": self.label,
            "singular_points": [float(p) for p in self.singular_points],
            "tol": self.tol,
        }
        write_json(path.with_suffix(".json"), sidecar)
        return path


# ----------------------------------------------------------------------
# One-dimensional arcsine family
# ----------------------------------------------------------------------
@overload
def chebyshev_arcsine_density(a: int, t: float) -> float: ...
@overload
def chebyshev_arcsine_density(a: int, t: NDArray[np.float64]) -> NDArray[np.float64]: ...
def chebyshev_arcsine_density(a: int, t: ArrayLike) -> float | NDArray[np.float64]:
    """d_a(t) = T_|a|(t/2) 1(|t| <= 2) / (pi sqrt(4 - t^2)).

    Raises:
        SingularAbscissa: if any ``|t| == 2``.
    """

    values = np.asarray(t, dtype=np.float64)
    if np.any(np.abs(values) == 2.0):
        raise SingularAbscissa(2.0, "d_a is singular at t = +-2")
    inside = np.abs(values) < 2.0
    safe = np.where(inside, values, 0.0)
    density = special.eval_chebyt(abs(a), 0.5 * safe) / (np.pi * np.sqrt(4.0 - safe * safe))
    out = np.where(inside, density, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


# ----------------------------------------------------------------------
# Square-lattice densities
# ----------------------------------------------------------------------
def _check_abscissae(lam: NDArray[np.float64]) -> None:
    for point in (0.0, 4.0, -4.0):
        if np.any(lam == point):
            raise SingularAbscissa(point)


def _support_angles(
    lam: NDArray[np.float64], gap_four: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``alpha = arccos((lam-2)/2)`` and ``delta = pi - alpha`` for 0 < lam < 4."""

    alpha = 2.0 * np.arcsin(0.5 * np.sqrt(gap_four))
    delta = 2.0 * np.arcsin(0.5 * np.sqrt(lam))
    return alpha, delta


def _angle_kernel(
    lam: NDArray[np.float64],
    alpha: NDArray[np.float64],
    delta: NDArray[np.float64],
    s: NDArray[np.float64],
    gap_right: NDArray[np.float64],
) -> NDArray[np.float64]:
    """1 / (pi^2 sqrt(4 - (lam - 2 cos s)^2)) for s in (0, alpha); leading axes broadcast."""

    upper = np.where(lam >= 2.0, np.sin(0.5 * (s + alpha)), np.sin(delta + 0.5 * gap_right))
    first = 4.0 * np.sin(0.5 * gap_right) * upper
    second = lam + 4.0 * np.sin(0.5 * s) ** 2
    return 1.0 / (np.pi**2 * np.sqrt(first * second))


def _rho_positive(
    a: int,
    b: int,
    lam: NDArray[np.float64],
    gap_four: NDArray[np.float64],
    tol: float,
) -> NDArray[np.float64]:
    alpha, delta = _support_angles(lam, gap_four)
    lam_c, alpha_c, delta_c = lam[..., None], alpha[..., None], delta[..., None]

    def integrand(
        x: NDArray[np.float64], gap_left: NDArray[np.float64], gap_right: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        kernel = _angle_kernel(lam_c, alpha_c, delta_c, gap_left, gap_right)
        chebyshev = special.eval_chebyt(abs(b), 0.5 * (lam_c - 2.0 * np.cos(x)))
        return np.cos(a * x) * chebyshev * kernel

    return np.asarray(tanh_sinh(integrand, np.zeros_like(alpha), alpha, tol=tol))


def rho_grid(
    a: int, b: int, lam: ArrayLike, tol: float = DEFAULT_TOL
) -> NDArray[np.float64]:
    """Vectorized rho_{a,b}; zero outside [-4, 4].

    Raises:
        SingularAbscissa: if any abscissa equals 0 or +-4.
    """

    if tol <= 0.0:
        raise InvalidParameter(f"tol must be positive, got {tol}")
    values = np.asarray(lam, dtype=np.float64)
    _check_abscissae(values)
    flat = values.ravel()
    out = np.zeros(flat.shape)
    inside = np.abs(flat) < 4.0
    if np.any(inside):
        magnitude = np.abs(flat[inside])
        computed = _rho_positive(a, b, magnitude, 4.0 - magnitude, tol)
        if (a + b) % 2:
            computed = np.where(flat[inside] < 0.0, -computed, computed)
        out[inside] = computed
    return out.reshape(values.shape)


def rho(a: int, b: int, lam: float, tol: float = DEFAULT_TOL) -> float:
    """rho_{a,b}(lam) = (d_a * d_b)(lam) to absolute accuracy ``tol``."""

    return float(rho_grid(a, b, np.float64(lam), tol))


def rho_table(
    max_a: int, max_b: int, lam: float, tol: float = DEFAULT_TOL, *, max_level: int = 13
) -> NDArray[np.float64]:
    """All rho_{a,b}(lam) for 0 <= a <= max_a, 0 <= b <= max_b in one quadrature pass."""

    if lam in (0.0, 4.0, -4.0):
        raise SingularAbscissa(lam)
    if abs(lam) > 4.0:
        return np.zeros((max_a + 1, max_b + 1))
    magnitude = abs(lam)
    alpha, delta = _support_angles(np.float64(magnitude), np.float64(4.0 - magnitude))
    a_range = np.arange(max_a + 1)
    b_range = np.arange(max_b + 1)
    previous: NDArray[np.float64] | None = None
    table = np.zeros((max_a + 1, max_b + 1))
    for level in range(3, max_level + 1):
        s, gap_left, gap_right, weights = tanh_sinh_rule(level).mapped(
            np.asarray(0.0), np.asarray(alpha)
        )
        kernel = _angle_kernel(magnitude, alpha, delta, gap_left, gap_right) * weights
        cosines = np.cos(np.outer(a_range, s))
        chebyshev = special.eval_chebyt(
            b_range[:, None], 0.5 * (magnitude - 2.0 * np.cos(s))[None, :]
        )
        table = cosines @ (kernel[:, None] * chebyshev.T)
        if previous is not None and np.max(np.abs(table - previous)) <= tol:
            break
        previous = table
    else:
        LOG.warning("rho_table at lam=%g did not reach tol=%g", lam, tol)
    if lam < 0.0:
        parity = (-1.0) ** np.add.outer(a_range, b_range)
        table = table * parity
    return table


def density_integral(
    a: int, b: int, lo: float, hi: float, tol: float = DEFAULT_TOL
) -> float:
    """Integral of rho_{a,b} over [lo, hi], singularity-aware at 0 and +-4."""

    if hi < lo:
        return -density_integral(a, b, hi, lo, tol)
    total = 0.0
    sign = (-1.0) ** (a + b)
    pieces = ((max(lo, 0.0), min(hi, 4.0), 1.0), (max(-hi, 0.0), min(-lo, 4.0), sign))
    for left, right, factor in pieces:
        if right <= left:
            continue
        start = max(left, _LOG_CUTOFF)

        def integrand(
            x: NDArray[np.float64],
            gap_left: NDArray[np.float64],
            gap_right: NDArray[np.float64],
            right: float = right,
        ) -> NDArray[np.float64]:
            gap_four = gap_right + (4.0 - right) if right == 4.0 else 4.0 - x
            return _rho_positive(a, b, x, gap_four, 0.1 * tol)

        total += factor * float(tanh_sinh(integrand, start, right, tol=tol))
    return total


def log_singularity_bound(x: ArrayLike) -> NDArray[np.float64]:
    """log(100/|x|) on [-4, 4], an upper bound for rho_{0,0}."""

    values = np.abs(np.asarray(x, dtype=np.float64))
    return np.where(values <= 4.0, np.log(100.0 / values), 0.0)


def lipschitz_bound(epsilon: float, a: int, b: int) -> float:
    """2 eps^{-3/2} (a^2 + b^2 + 1): bound on |(d_a * d_b)'| away from 0 and +-4."""

    return 2.0 * epsilon**-1.5 * (a * a + b * b + 1)


def default_grid(num: int = 1000, clamp: float = GRID_CLAMP) -> NDArray[np.float64]:
    """Grid on [-4, 4] that stays ``clamp`` away from 0 and +-4."""

    half = np.linspace(clamp, 4.0 - clamp, num // 2)
    return np.concatenate([-half[::-1], half])


def tabulate_rho(
    a: int, b: int, grid: ArrayLike | None = None, tol: float = DEFAULT_TOL
) -> DensityGrid:
    points = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    return DensityGrid(
        grid=points,
        values=rho_grid(a, b, points, tol),
        singular_points=[-4.0, 0.0, 4.0],
        tol=tol,
        label=f"rho_{a}_{b}",
        offsets=(a, b),
    )


def tabulate_arcsine(a: int, grid: ArrayLike | None = None) -> DensityGrid:
    if grid is None:
        half = np.linspace(GRID_CLAMP, 2.0 - GRID_CLAMP, 500)
        points = np.concatenate([-half[::-1], half])
    else:
        points = np.asarray(grid, dtype=np.float64)
    return DensityGrid(
        grid=points,
        values=np.asarray(chebyshev_arcsine_density(a, points)),
        singular_points=[-2.0, 2.0],
        tol=0.0,
        label=f"d_{a}",
        offsets=(a, 0),
    )


# ----------------------------------------------------------------------
# Cauchy smoothing
# ----------------------------------------------------------------------
def line_resolvent_im(b: int, u: ArrayLike, eta: float) -> NDArray[np.float64]:
    """(kappa_eta * d_b)(u), from the resolvent of the line graph.

    With z = u + i eta = w + 1/w and |w| < 1,
    int d_b(x) / (x - z) dx = -w^(|b|+1) / (1 - w^2).
    """

    z = np.asarray(u, dtype=np.float64) + 1j * eta
    root = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    w = 2.0 / (z + root)
    return np.imag(-(w ** (abs(b) + 1)) / (1.0 - w * w))


def smoothed_rho(
    a: int,
    b: int,
    eta: float,
    lam: ArrayLike,
    tol: float = DEFAULT_TOL,
    *,
    max_points: int = 1 << 16,
) -> NDArray[np.float64]:
    """(kappa_eta * rho_{a,b})(lam) by the periodic trapezoid rule in the angle s."""

    CauchyKernel(eta)
    values = np.asarray(lam, dtype=np.float64)
    flat = values.ravel()
    out = np.empty(flat.shape)
    block = 256
    for start in range(0, flat.size, block):
        chunk = flat[start : start + block, None]
        points = 64
        previous: NDArray[np.float64] | None = None
        while True:
            s = np.linspace(0.0, np.pi, points + 1)
            weights = np.full(points + 1, np.pi / points)
            weights[[0, -1]] *= 0.5
            samples = np.cos(a * s) * line_resolvent_im(b, chunk - 2.0 * np.cos(s), eta)
            estimate = samples @ weights / np.pi
            if previous is not None and np.max(np.abs(estimate - previous)) <= tol:
                break
            if points >= max_points:
                LOG.warning("smoothed_rho eta=%g stopped at %d points", eta, points)
                break
            previous = estimate
            points *= 2
        out[start : start + block] = estimate
    return out.reshape(values.shape)


def cauchy_smooth(
    source: AtomicMeasure | DensityGrid | OffsetPair,
    eta: float,
    lam: ArrayLike,
) -> NDArray | float | complex:
    """(kappa_eta * f)(lam) for a measure (exact), a tabulated density or rho_{a,b}.

    Tabulated densities use the trapezoid rule on their own grid, so the grid
    spacing must resolve ``eta``.
    """

    kernel = CauchyKernel(eta)
    if isinstance(source, AtomicMeasure):
        return source.smooth(eta, lam)
    if isinstance(source, OffsetPair):
        out = smoothed_rho(source.a, source.b, eta, lam)
        return float(out) if out.ndim == 0 else out
    values = np.asarray(lam, dtype=np.float64)
    smoothed = integrate.trapezoid(
        source.values * kernel(source.grid[None, :] - values.reshape(-1, 1)), source.grid, axis=1
    )
    return float(smoothed[0]) if values.ndim == 0 else smoothed.reshape(values.shape)


# ----------------------------------------------------------------------
# Continuity constants
# ----------------------------------------------------------------------
def f1_norm(p: float, cutoff: float = NORM_CUTOFF) -> float:
    """||f_1||_p for f_1(t) = int_{-inf}^t (kappa_1 - pi delta), i.e. |f_1(t)| = arctan(1/|t|).

    The integral over [-cutoff, cutoff] is done by quadrature and the tail is
    bounded by int_cutoff^inf t^{-p} dt.
    """

    if p <= 1.0:
        raise InvalidParameter(f"||f_1||_p diverges for p = {p} <= 1")
    near, _ = integrate.quad(
        lambda t: math.atan(1.0 / t) ** p if t > 0 else (0.5 * math.pi) ** p, 0.0, 1.0, limit=200
    )
    far, _ = integrate.quad(
        lambda u: math.atan(math.exp(-u)) ** p * math.exp(u), 0.0, math.log(cutoff), limit=400
    )
    tail = cutoff ** (1.0 - p) / (p - 1.0)
    return float((2.0 * (near + far + tail)) ** (1.0 / p))


def continuity_constants(epsilon: float, p: float) -> float:
    """c_{eps,p} = eps^{-1/p} + c_p eps^{-3/2} with c_p = 8 ||f_1||_p."""

    if not 0.0 < epsilon <= 1.0:
        raise InvalidParameter(f"epsilon must lie in (0, 1], got {epsilon}")
    c_p = 8.0 * f1_norm(p)
    return epsilon ** (-1.0 / p) + c_p * epsilon**-1.5


# ----------------------------------------------------------------------
# Angle pairs on the level curve 2cos(alpha) + 2cos(beta) = E
# ----------------------------------------------------------------------
def _check_energy(energy: float) -> None:
    if not (-4.0 < energy < 4.0) or energy == 0.0:
        raise InvalidParameter(f"energy must lie in (-4, 4) without 0, got {energy}")


class AngleSampler:
    """Inverse-CDF sampler of (A, B) given 2cos A + 2cos B = E.

    theta = 2cos(A) has density d_0(u) d_0(E - u) / rho_{0,0}(E); in the angle
    s = |A| this is proportional to the kernel of ``rho``, tabulated on a
    uniform grid of the tanh-sinh variable so both endpoints are resolved.
    """

    def __init__(self, energy: float, table_size: int = ANGLE_TABLE_SIZE) -> None:
        _check_energy(energy)
        self.energy = energy
        self._magnitude = abs(energy)
        alpha, delta = _support_angles(
            np.float64(self._magnitude), np.float64(4.0 - self._magnitude)
        )
        self._alpha = float(alpha)
        self._delta = float(delta)
        t = np.linspace(-T_MAX, T_MAX, table_size)
        self._t = t
        phi = 0.5 * np.pi * np.sinh(t)
        complement = np.exp(-np.abs(phi)) / np.cosh(phi)
        half = 0.5 * self._alpha
        gap_left = half * np.where(t < 0.0, complement, 2.0 - complement)
        gap_right = half * np.where(t > 0.0, complement, 2.0 - complement)
        density = _angle_kernel(self._magnitude, alpha, delta, gap_left, gap_right)
        jacobian = half * 0.5 * np.pi * np.cosh(t) / np.cosh(phi) ** 2
        weighted = density * jacobian
        cumulative = np.concatenate(
            [[0.0], np.cumsum(0.5 * (weighted[1:] + weighted[:-1]) * np.diff(t))]
        )
        self._cdf = cumulative / cumulative[-1]

    def _angles(self, t: NDArray[np.float64]) -> NDArray[np.float64]:
        phi = 0.5 * np.pi * np.sinh(t)
        complement = np.exp(-np.abs(phi)) / np.cosh(phi)
        half = 0.5 * self._alpha
        return np.where(t <= 0.0, half * complement, self._alpha - half * complement)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> AnglePair:
        count = 1 if size is None else size
        t = np.interp(rng.random(count), self._cdf, self._t)
        s = self._angles(t)
        beta = np.arccos(np.clip(0.5 * (self._magnitude - 2.0 * np.cos(s)), -1.0, 1.0))
        signs = rng.choice(np.array([-1.0, 1.0]), size=(2, count))
        alpha = signs[0] * s
        beta = signs[1] * beta
        if self.energy < 0.0:
            # Checkerboard: (alpha, beta) -> (pi - alpha, pi - beta) flips the energy.
            alpha = np.sign(alpha) * (np.pi - np.abs(alpha))
            beta = np.sign(beta) * (np.pi - np.abs(beta))
        if size is None:
            return AnglePair(alpha=alpha[0], beta=beta[0])
        return AnglePair(alpha=alpha, beta=beta)


def angle_pair_sample(
    energy: float, rng: np.random.Generator, size: int | None = None
) -> AnglePair:
    """Sample (alpha, beta) on the level curve at ``energy``."""

    return AngleSampler(energy).sample(rng, size)


def alpha_marginal_density(energy: float, alpha: ArrayLike) -> NDArray[np.float64]:
    """Density of A: d_0(E - 2cos alpha) / (2 pi rho_{0,0}(E)) on [-pi, pi]."""

    _check_energy(energy)
    shifted = energy - 2.0 * np.cos(np.asarray(alpha, dtype=np.float64))
    inside = np.abs(shifted) < 2.0
    values = np.where(inside, shifted, 0.0)
    density = np.where(
        inside, 1.0 / (np.pi * np.sqrt(4.0 - values * values)), 0.0
    )
    return density / (2.0 * np.pi * rho(0, 0, energy))
