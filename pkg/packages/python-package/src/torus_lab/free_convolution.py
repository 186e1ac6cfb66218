"""Free convolution of a probability measure with the semicircle law of variance t.

For lam real, v_t(lam) is the smallest v >= 0 with
sum_i w_i / ((x_i - lam)^2 + v^2) <= 1/t, psi_t(lam) = lam - t Re m_mu(lam + i v_t)
is an increasing homeomorphism of the line and the free convolution has
density p_t = v_t(psi_t^-1(lam)) / (pi t).  Everything is computed by
bisection, which only needs the monotonicity of the defining integrals.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from .errors import InvalidParameter, RootBracketError
from .lab.artifacts import write_csv
from .measures import AtomicMeasure
from .quadrature import tanh_sinh
from .spectral_density import DensityGrid

LOG = logging.getLogger(__name__)

DEFAULT_ROOT_TOL = 1e-10
TABLE_SIZE = 20001
PLATEAU_TOL = 1e-9
_BLOCK = 512


@dataclass(slots=True)
class FreeConvState:
    """A probability measure ``mu`` and the semicircle variance ``t``."""

    mu: AtomicMeasure
    t: float
    root_tol: float = DEFAULT_ROOT_TOL

    def __post_init__(self) -> None:
        if isinstance(self.mu, DensityGrid):
            self.mu = self.mu.to_measure()
        if not self.mu.is_probability(atol=1e-9):
            raise InvalidParameter("free convolution needs a probability measure")
        if not self.t > 0.0:
            raise InvalidParameter(f"t must be positive, got {self.t}")
        if not self.root_tol > 0.0:
            raise InvalidParameter(f"root_tol must be positive, got {self.root_tol}")

    @property
    def support(self) -> tuple[float, float]:
        """An interval containing the support of the free convolution."""

        spread = 2.0 * math.sqrt(self.t)
        return float(self.mu.locations.min()) - spread, float(self.mu.locations.max()) + spread


def _moments(
    state: FreeConvState, lam: NDArray[np.float64], v: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(sum w / ((x - lam)^2 + v^2), sum w (x - lam) / ((x - lam)^2 + v^2)) per abscissa."""

    x = state.mu.locations
    w = state.mu.weights.real
    inverse = np.empty(lam.shape)
    real = np.empty(lam.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, lam.size, _BLOCK):
            diff = x[None, :] - lam[start : start + _BLOCK, None]
            denom = diff * diff + v[start : start + _BLOCK, None] ** 2
            inverse[start : start + _BLOCK] = (1.0 / denom) @ w
            real[start : start + _BLOCK] = (diff / denom) @ w
    return inverse, real


def _v_flat(state: FreeConvState, lam: NDArray[np.float64]) -> NDArray[np.float64]:
    limit = 1.0 / state.t
    at_zero, _ = _moments(state, lam, np.zeros_like(lam))
    lo = np.zeros_like(lam)
    hi = np.full_like(lam, math.sqrt(state.t))
    active = ~(at_zero <= limit)
    steps = max(1, math.ceil(math.log2(math.sqrt(state.t) / state.root_tol)) + 1)
    if np.any(active):
        sub_lam, sub_lo, sub_hi = lam[active], lo[active], hi[active]
        for _ in range(steps):
            mid = 0.5 * (sub_lo + sub_hi)
            value, _ = _moments(state, sub_lam, mid)
            above = value > limit
            sub_lo = np.where(above, mid, sub_lo)
            sub_hi = np.where(above, sub_hi, mid)
        hi[active] = sub_hi
    return np.where(active, hi, 0.0)


def v_t(state: FreeConvState, lam: ArrayLike) -> NDArray[np.float64] | float:
    """inf{v >= 0 : int dmu(x) / ((x - lam)^2 + v^2) <= 1/t}, within ``root_tol``."""

    values = np.asarray(lam, dtype=np.float64)
    out = _v_flat(state, values.ravel()).reshape(values.shape)
    return float(out) if values.ndim == 0 else out


def _psi_flat(
    state: FreeConvState, lam: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    v = _v_flat(state, lam)
    _, real = _moments(state, lam, v)
    return lam - state.t * real, v


def psi_t(state: FreeConvState, lam: ArrayLike) -> NDArray[np.float64] | float:
    """lam - t int (x - lam) / ((x - lam)^2 + v_t(lam)^2) dmu(x)."""

    values = np.asarray(lam, dtype=np.float64)
    out, _ = _psi_flat(state, values.ravel())
    out = out.reshape(values.shape)
    return float(out) if values.ndim == 0 else out


def psi_t_inverse(state: FreeConvState, lam: ArrayLike) -> NDArray[np.float64] | float:
    """Root of psi_t(x) = lam by bisection on [lam - sqrt(t), lam + sqrt(t)].

    Raises:
        RootBracketError: if psi_t - lam does not change sign on the bracket.
    """

    values = np.asarray(lam, dtype=np.float64)
    target = values.ravel()
    spread = math.sqrt(state.t)
    lo = target - spread
    hi = target + spread
    psi_lo, _ = _psi_flat(state, lo)
    psi_hi, _ = _psi_flat(state, hi)
    bad = ~((psi_lo <= target) & (psi_hi >= target))
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise RootBracketError(
            f"psi_t - lam has no sign change on [{lo[first]:.6g}, {hi[first]:.6g}] "
            f"for lam={target[first]:.6g}"
        )
    steps = max(1, math.ceil(math.log2(2.0 * spread / state.root_tol)) + 1)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        psi_mid, _ = _psi_flat(state, mid)
        below = psi_mid < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = (0.5 * (lo + hi)).reshape(values.shape)
    return float(out) if values.ndim == 0 else out


def fc_density(state: FreeConvState, lam: ArrayLike) -> NDArray[np.float64] | float:
    """p_t(lam) = v_t(psi_t^-1(lam)) / (pi t); zero outside the support."""

    values = np.asarray(lam, dtype=np.float64)
    preimage = np.asarray(psi_t_inverse(state, values.ravel()))
    out = (_v_flat(state, preimage) / (math.pi * state.t)).reshape(values.shape)
    return float(out) if values.ndim == 0 else out


def fc_stieltjes_real(state: FreeConvState, lam: ArrayLike) -> NDArray[np.complex128] | complex:
    """Boundary value of the Stieltjes transform: (psi_t^-1(lam) - lam)/t + i pi p_t(lam)."""

    values = np.asarray(lam, dtype=np.float64)
    flat = values.ravel()
    preimage = np.asarray(psi_t_inverse(state, flat))
    out = (preimage - flat) / state.t + 1j * _v_flat(state, preimage) / state.t
    out = out.reshape(values.shape)
    return complex(out) if values.ndim == 0 else out


# ----------------------------------------------------------------------
# Tabulation, mass and quantiles
# ----------------------------------------------------------------------
@dataclass(slots=True)
class FcTable:
    """p_t tabulated through its pre-image: lam = psi_t(x), density = v_t(x) / (pi t).

    ``cdf`` is the trapezoid integral along the table normalized to end at
    one; ``mass`` is the raw total before normalization.
    """

    preimage: NDArray[np.float64]
    lam: NDArray[np.float64]
    density: NDArray[np.float64]
    cdf: NDArray[np.float64]
    mass: float
    t: float

    def to_csv(self, path: Path) -> Path:
        rows = (
            (float(lam), float(density), float(cdf))
            for lam, density, cdf in zip(self.lam, self.density, self.cdf, strict=True)
        )
        return write_csv(path, ["lambda", "density", "cdf"], rows)


def fc_table(state: FreeConvState, size: int = TABLE_SIZE) -> FcTable:
    """Tabulate on a uniform pre-image grid over [min supp mu - sqrt(t), max supp mu + sqrt(t)].

    psi_t maps this interval onto a superset of the support, so no root
    finding is needed.
    """

    if size < 3:
        raise InvalidParameter(f"table size must be at least 3, got {size}")
    spread = math.sqrt(state.t)
    preimage = np.linspace(
        float(state.mu.locations.min()) - spread, float(state.mu.locations.max()) + spread, size
    )
    lam, v = _psi_flat(state, preimage)
    density = v / (math.pi * state.t)
    steps = np.diff(lam)
    if np.any(steps <= 0.0):
        LOG.warning(
            "psi_t is not strictly increasing on the table (%d steps)", int(np.sum(steps <= 0.0))
        )
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * steps)])
    mass = float(cumulative[-1])
    return FcTable(
        preimage=preimage, lam=lam, density=density, cdf=cumulative / mass, mass=mass, t=state.t
    )


def _edge(state: FreeConvState, outside: float, inside: float) -> float:
    """Support edge psi_t(x_e), where x_e separates v_t = 0 from v_t > 0 in the pre-image."""

    limit = 1.0 / state.t
    x = state.mu.locations
    w = state.mu.weights.real
    for _ in range(200):
        mid = 0.5 * (outside + inside)
        if mid in (outside, inside):
            break
        if float(np.sum(w / (x - mid) ** 2)) > limit:
            inside = mid
        else:
            outside = mid
    return outside - state.t * float(np.sum(w / (x - outside)))


def support_intervals(
    state: FreeConvState, *, table: FcTable | None = None
) -> list[tuple[float, float]]:
    """Connected pieces of the support of p_t, located on the table and refined by bisection."""

    grid = table if table is not None else fc_table(state, size=2001)
    positive = grid.density > 0.0
    if positive[0] or positive[-1]:
        raise InvalidParameter("table does not cover the support")
    changes = np.flatnonzero(np.diff(positive.astype(np.int8)))
    x = grid.preimage
    edges = [
        _edge(state, float(x[i]), float(x[i + 1]))
        if not positive[i]
        else _edge(state, float(x[i + 1]), float(x[i]))
        for i in changes
    ]
    return list(zip(edges[0::2], edges[1::2], strict=True))


def fc_mass(state: FreeConvState, *, tol: float = 1e-9) -> float:
    """Total mass of p_t by tanh-sinh quadrature over each piece of the support."""

    def density(
        lam: NDArray[np.float64], _left: NDArray[np.float64], _right: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        return np.asarray(fc_density(state, lam))

    total = 0.0
    for lo, hi in support_intervals(state):
        total += float(tanh_sinh(density, lo, hi, tol=tol, max_level=10))
    return total


def fc_cdf(
    state: FreeConvState, lam: ArrayLike, *, table: FcTable | None = None
) -> NDArray[np.float64] | float:
    grid = table if table is not None else fc_table(state)
    out = np.interp(np.asarray(lam, dtype=np.float64), grid.lam, grid.cdf, left=0.0, right=1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(slots=True)
class QuantileTable:
    """gamma_0 <= ... <= gamma_n with int_{-inf}^{gamma_i} p_t = i/n."""

    gammas: NDArray[np.float64]
    t: float

    @property
    def n(self) -> int:
        return int(self.gammas.size - 1)


def _cell_cdf(table: FcTable, j: int, x: float) -> float:
    """Table CDF at x in [lam_j, lam_{j+1}], the density being linear across the cell."""

    lo, hi = float(table.lam[j]), float(table.lam[j + 1])
    left, right = float(table.density[j]), float(table.density[j + 1])
    h = x - lo
    slope = (right - left) / (hi - lo)
    return float(table.cdf[j]) + (left * h + 0.5 * slope * h * h) / table.mass


def fc_quantiles(
    state: FreeConvState,
    n: int,
    *,
    table: FcTable | None = None,
    root_tol: float | None = None,
) -> QuantileTable:
    """The i/n quantiles of p_t, i = 0..n.

    The cumulative trapezoid table brackets each quantile in one cell, where
    the CDF is solved by bisection to ``root_tol`` (default ``state.root_tol``).
    A level equal to the mass left of a gap in the support resolves to the
    middle of that gap.
    """

    if n < 1:
        raise InvalidParameter(f"n must be positive, got {n}")
    grid = table if table is not None else fc_table(state)
    xtol = state.root_tol if root_tol is None else root_tol
    intervals = support_intervals(state, table=grid)
    plateaus = []
    for (_, gap_lo), (gap_hi, _) in itertools.pairwise(intervals):
        middle = 0.5 * (gap_lo + gap_hi)
        plateaus.append((float(fc_cdf(state, middle, table=grid)), middle))
    gammas = np.empty(n + 1)
    gammas[0], gammas[n] = intervals[0][0], intervals[-1][1]
    last_cell = grid.lam.size - 2
    for i in range(1, n):
        level = i / n
        gaps = [middle for value, middle in plateaus if abs(value - level) <= PLATEAU_TOL]
        if gaps:
            gammas[i] = gaps[0]
            continue
        k = int(np.searchsorted(grid.cdf, level, side="left"))
        j = min(max(k - 1, 0), last_cell)
        lo, hi = float(grid.lam[j]), float(grid.lam[j + 1])
        if hi <= lo or _cell_cdf(grid, j, hi) <= level:
            gammas[i] = hi
            continue
        gammas[i] = optimize.bisect(
            lambda x, j=j, level=level: _cell_cdf(grid, j, x) - level, lo, hi, xtol=xtol
        )
    return QuantileTable(gammas=np.maximum.accumulate(gammas), t=state.t)


def sigma_sq(
    q: ArrayLike,
    k: int,
    diagonal: ArrayLike,
    t: float,
    *,
    root_tol: float = DEFAULT_ROOT_TOL,
    quantiles: QuantileTable | None = None,
) -> float:
    """sum_j |q_j|^2 t / ((d_j - x)^2 + v_t(x)^2) with x = psi_t^-1(gamma_{k,t}).

    ``mu`` is the empirical measure of ``diagonal``.
    """

    vector = np.asarray(q, dtype=np.complex128)
    d = np.asarray(diagonal, dtype=np.float64)
    n = d.size
    if vector.shape != d.shape:
        raise InvalidParameter("q and the diagonal must have the same length")
    if not math.isclose(float(np.linalg.norm(vector)), 1.0, abs_tol=1e-8):
        raise InvalidParameter("q must be a unit vector")
    if not 1 <= k <= n:
        raise InvalidParameter(f"k={k} outside [1, {n}]")
    state = FreeConvState(AtomicMeasure.empirical(d), t, root_tol)
    table = quantiles if quantiles is not None else fc_quantiles(state, n)
    x = float(psi_t_inverse(state, table.gammas[k]))
    v = float(v_t(state, x))
    return float(np.sum(np.abs(vector) ** 2 * t / ((d - x) ** 2 + v * v)))
