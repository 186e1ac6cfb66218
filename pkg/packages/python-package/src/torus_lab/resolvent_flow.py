"""Hermitian Brownian motion started at D and the resolvent observables along it.

W_t = D + (B_t + B_t^*) / sqrt(2n) has GUE increments with entry variance
dt/n.  Along the flow m_t(z) = (1/n) Tr (W_t - z)^-1 and G_t(x, x, z) obey
dm = m dm/dz dt + dM and dG = m dG/dz dt + dM(x), the latter with quadratic
variation (1/(n (Im z)^2)) (Im G)^2 dt.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidParameter
from .lab.artifacts import write_csv
from .random_matrix import hermitian_eig

LOG = logging.getLogger(__name__)

DEFAULT_N = 100
DEFAULT_T_FINAL = 0.02
DEFAULT_STEPS = 50
DEFAULT_ETA = 0.1
MAX_RECORDS = 200


@dataclass(slots=True)
class FlowState:
    matrix: NDArray[np.complex128]
    t: float = 0.0

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def from_diagonal(cls, diagonal: ArrayLike) -> FlowState:
        return cls(np.diag(np.asarray(diagonal, dtype=np.float64)).astype(np.complex128))


def flow_increment(n: int, dt: float, rng: np.random.Generator) -> NDArray[np.complex128]:
    """(G + G^*) / sqrt(2n) with E|G_ij|^2 = dt, so every entry has variance dt/n."""

    scale = math.sqrt(0.5 * dt)
    g = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return (g + g.conj().T) / math.sqrt(2.0 * n)


def flow_step(state: FlowState, dt: float, rng: np.random.Generator) -> FlowState:
    if not dt > 0.0:
        raise InvalidParameter(f"dt must be positive, got {dt}")
    return FlowState(state.matrix + flow_increment(state.n, dt, rng), state.t + dt)


@dataclass(slots=True)
class FlowObservable:
    """Recorded m_t(z), G_t(x, x, z) and their z-derivatives."""

    z: complex
    xs: tuple[int, ...]
    n: int = 0
    times: list[float] = field(default_factory=list)
    m_path: list[complex] = field(default_factory=list)
    dm_path: list[complex] = field(default_factory=list)
    g_paths: list[NDArray[np.complex128]] = field(default_factory=list)
    dg_paths: list[NDArray[np.complex128]] = field(default_factory=list)

    def arrays(self) -> tuple[NDArray, NDArray, NDArray, NDArray, NDArray]:
        """(times, m, dm/dz, G, dG/dz) with G arrays of shape (records, len(xs))."""

        return (
            np.asarray(self.times),
            np.asarray(self.m_path),
            np.asarray(self.dm_path),
            np.asarray(self.g_paths).reshape(len(self.times), len(self.xs)),
            np.asarray(self.dg_paths).reshape(len(self.times), len(self.xs)),
        )

    def to_csv(self, path: Path) -> Path:
        header = ["step", "t", "re_m", "im_m"]
        for x in self.xs:
            header += [f"re_G_{x}", f"im_G_{x}"]
        rows = []
        for step, (t, m, g) in enumerate(zip(self.times, self.m_path, self.g_paths, strict=True)):
            row: list[object] = [step, float(t), float(m.real), float(m.imag)]
            for value in g:
                row += [float(value.real), float(value.imag)]
            rows.append(row)
        return write_csv(path, header, rows)


def record_observables(
    state: FlowState, z: complex, xs: tuple[int, ...], observable: FlowObservable
) -> None:
    """Append m, dm/dz, G(x, x) and dG/dz(x, x) computed from one eigendecomposition."""

    if z.imag <= 0.0:
        raise InvalidParameter("observables need Im z > 0")
    system = hermitian_eig(state.matrix)
    inverse = 1.0 / (system.eigenvalues - z)
    weights = np.abs(system.eigenvectors[list(xs), :]) ** 2
    observable.times.append(state.t)
    observable.m_path.append(complex(np.mean(inverse)))
    observable.dm_path.append(complex(np.mean(inverse**2)))
    observable.g_paths.append(weights @ inverse)
    observable.dg_paths.append(weights @ inverse**2)


def simulate_path(
    start: FlowState,
    z: complex,
    xs: tuple[int, ...],
    t_final: float,
    steps: int,
    rng: np.random.Generator,
    *,
    record_every: int | None = None,
) -> FlowObservable:
    """Run ``steps`` exact Gaussian steps to ``t_final``, recording every ``record_every`` steps."""

    if steps < 1:
        raise InvalidParameter(f"steps must be positive, got {steps}")
    every = record_every if record_every is not None else max(1, math.ceil(steps / MAX_RECORDS))
    dt = t_final / steps
    observable = FlowObservable(z=z, xs=tuple(xs), n=start.n)
    state = start
    record_observables(state, z, observable.xs, observable)
    for step in range(1, steps + 1):
        state = flow_step(state, dt, rng)
        if step % every == 0 or step == steps:
            record_observables(state, z, observable.xs, observable)
    return observable


def simulate_paths(
    start: FlowState,
    z: complex,
    xs: tuple[int, ...],
    t_final: float,
    steps: int,
    paths: int,
    rng: np.random.Generator,
) -> list[FlowObservable]:
    return [simulate_path(start, z, xs, t_final, steps, rng) for _ in range(paths)]


def flow_endpoint_spectra(
    start: FlowState, t: float, steps: int, paths: int, rng: np.random.Generator
) -> list[NDArray[np.float64]]:
    """Eigenvalues of W_t for independent paths."""

    spectra = []
    dt = t / steps
    for _ in range(paths):
        state = start
        for _ in range(steps):
            state = flow_step(state, dt, rng)
        spectra.append(hermitian_eig(state.matrix).eigenvalues)
    return spectra


# ----------------------------------------------------------------------
# Checks of the drift and the quadratic variation
# ----------------------------------------------------------------------
def _stieltjes(matrix: NDArray[np.complex128], z: complex) -> tuple[complex, complex]:
    eigenvalues = hermitian_eig(matrix).eigenvalues
    inverse = 1.0 / (eigenvalues - z)
    return complex(np.mean(inverse)), complex(np.mean(inverse**2))


def euler_bias(
    start: FlowState, z: complex, dts: tuple[float, ...], samples: int, rng: np.random.Generator
) -> NDArray[np.complex128]:
    """Drift-residual bias per unit time of one step of size dt, for each dt in ``dts``.

    bias(dt) = E[m(W + sqrt(dt) U) - m(W)] / dt - m dm/dz for a unit GUE
    increment U, estimated with antithetic pairs +-U shared by every dt. The
    Euler step is first order, so bias(dt / 2) is about bias(dt) / 2.
    """

    if samples < 1:
        raise InvalidParameter(f"samples must be positive, got {samples}")
    if z.imag <= 0.0:
        raise InvalidParameter("euler_bias needs Im z > 0")
    if not dts or min(dts) <= 0.0:
        raise InvalidParameter(f"step sizes must be positive, got {dts}")
    m, dm = _stieltjes(start.matrix, z)
    totals = np.zeros(len(dts), dtype=np.complex128)
    for _ in range(samples):
        unit = flow_increment(start.n, 1.0, rng)
        for slot, dt in enumerate(dts):
            step = math.sqrt(dt) * unit
            plus, _ = _stieltjes(start.matrix + step, z)
            minus, _ = _stieltjes(start.matrix - step, z)
            totals[slot] += 0.5 * (plus + minus) - m
    return totals / samples / np.asarray(dts) - m * dm


def euler_order_ratio(
    start: FlowState, z: complex, dt: float, samples: int, rng: np.random.Generator
) -> float:
    """|bias(dt / 2)| / |bias(dt)|; one half for a first-order scheme."""

    coarse, fine = euler_bias(start, z, (dt, 0.5 * dt), samples, rng)
    return float(abs(fine) / abs(coarse)) if coarse != 0.0 else math.nan


@dataclass(slots=True)
class DriftResidual:
    """max over records K of |mean_paths R_K| / stderr, R_K the cumulative residual."""

    statistic: float
    means: NDArray[np.complex128]
    stderrs: NDArray[np.float64]
    include_drift: bool


def drift_residual(
    paths: list[FlowObservable], *, include_drift: bool = True, min_paths: int = 100
) -> DriftResidual:
    """Cumulative sum of dm - m (dm/dz) dt along each path, tested against zero mean.

    With ``include_drift=False`` the drift is omitted, a negative control
    whose statistic should be large.
    """

    if len(paths) < 2:
        raise InvalidParameter("drift_residual needs at least two paths")
    if len(paths) < min_paths:
        LOG.warning("drift_residual on %d paths (< %d)", len(paths), min_paths)
    cumulative = []
    for path in paths:
        times, m, dm, _, _ = path.arrays()
        increments = np.diff(m)
        if include_drift:
            increments = increments - m[:-1] * dm[:-1] * np.diff(times)
        cumulative.append(np.cumsum(increments))
    stack = np.asarray(cumulative)
    count = stack.shape[0]
    means = stack.mean(axis=0)
    spread = np.sum(np.abs(stack - means) ** 2, axis=0) / (count - 1)
    stderrs = np.sqrt(spread / count)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(stderrs > 0.0, np.abs(means) / stderrs, 0.0)
    return DriftResidual(
        statistic=float(scores.max()), means=means, stderrs=stderrs, include_drift=include_drift
    )


@dataclass(slots=True)
class QuadraticVariation:
    """``bound`` is ``predicted`` with (Im G)^2 replaced by its ceiling (Im z)^-2."""

    realized: float
    predicted: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.realized / self.predicted if self.predicted > 0.0 else math.nan


def qv_check(path: FlowObservable, x: int) -> QuadraticVariation:
    """Realized sum |dG - m dG/dz dt|^2 against sum (Im G)^2 dt / (n (Im z)^2) for site ``x``."""

    if x not in path.xs:
        raise InvalidParameter(f"site {x} was not recorded")
    column = path.xs.index(x)
    times, m, _, g, dg = path.arrays()
    steps = np.diff(times)
    increments = np.diff(g[:, column]) - m[:-1] * dg[:-1, column] * steps
    realized = float(np.sum(np.abs(increments) ** 2))
    eta = path.z.imag
    predicted = float(np.sum(g[:-1, column].imag ** 2 * steps) / (path.n * eta * eta))
    # t n^3 when Im z = 1/n
    bound = float(times[-1] - times[0]) / (path.n * eta**4)
    return QuadraticVariation(realized=realized, predicted=predicted, bound=bound)


def stopping_time_experiment(
    diagonal: ArrayLike,
    t_final: float,
    z: complex,
    paths: int,
    rng: np.random.Generator,
    *,
    threshold: float = 2.0,
    steps: int = DEFAULT_STEPS,
) -> float:
    """Fraction of paths on which |m_s(z)| reaches threshold (n t)^-1/2 before ``t_final``.

    Raises:
        InvalidParameter: unless Im z = 1/n and |m_0(z)| <= (n t)^-1/2.
    """

    d = np.asarray(diagonal, dtype=np.float64)
    n = d.size
    if not math.isclose(z.imag, 1.0 / n, rel_tol=1e-9):
        raise InvalidParameter(f"stopping-time experiment needs Im z = 1/n = {1.0 / n}")
    if t_final == 0.0:
        return 0.0
    if t_final < 0.0:
        raise InvalidParameter(f"t_final must be non-negative, got {t_final}")
    level = (n * t_final) ** -0.5
    start = abs(complex(np.mean(1.0 / (d - z))))
    if start > level:
        raise InvalidParameter(f"|m_0(z)| = {start:.4g} exceeds (n t)^-1/2 = {level:.4g}")
    barrier = threshold * level
    dt = t_final / steps
    stopped = 0
    for _ in range(paths):
        state = FlowState.from_diagonal(d)
        for _ in range(steps):
            state = flow_step(state, dt, rng)
            eigenvalues = hermitian_eig(state.matrix).eigenvalues
            if abs(complex(np.mean(1.0 / (eigenvalues - z)))) >= barrier:
                stopped += 1
                break
    return stopped / paths
