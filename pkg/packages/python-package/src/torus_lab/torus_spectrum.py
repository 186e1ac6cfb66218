"""Discrete torus with boundary phases: eigensystem, spectral measures and torus statistics.

The cycle A_c has (A_c)[n-1, 0] = exp(2 pi i n c) and (A_c)[0, n-1] its
conjugate, so that v_k(x) = exp(2 pi i x (k/n + c)), x = 1..n, is an
eigenvector with eigenvalue 2cos(2 pi (k/n + c)).  The torus is
A_{c,d} = A_c (x) I + I (x) A_d with site (x, y) stored at index
(x-1) * n + (y-1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidParameter
from .measures import AtomicMeasure
from .spectral_density import density_integral, rho, smoothed_rho

LOG = logging.getLogger(__name__)

_BLOCK = 256


@dataclass(frozen=True, slots=True)
class TorusSpec:
    """Side length ``n`` and boundary phases ``c``, ``d`` in [0, 1)."""

    n: int
    c: float = 0.0
    d: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InvalidParameter(f"torus side must be at least 2, got {self.n}")
        for name, phase in (("c", self.c), ("d", self.d)):
            if not 0.0 <= phase < 1.0:
                raise InvalidParameter(f"boundary phase {name} must lie in [0, 1), got {phase}")

    @property
    def dim(self) -> int:
        return self.n * self.n

    def site(self, x: int, y: int) -> int:
        """Matrix index of the 1-based site (x, y)."""

        return (x - 1) * self.n + (y - 1)

    def adjacency(self) -> NDArray[np.complex128]:
        identity = np.eye(self.n)
        return np.kron(cycle_adjacency(self.n, self.c), identity) + np.kron(
            identity, cycle_adjacency(self.n, self.d)
        )

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> TorusSpec:
        c, d = rng.random(2)
        return cls(n=n, c=float(c), d=float(d))


@dataclass(frozen=True, slots=True)
class ModeIndex:
    j: int
    k: int


def cycle_adjacency(n: int, c: float) -> NDArray[np.complex128]:
    """Adjacency of the n-cycle whose wrap-around edge carries the phase exp(2 pi i n c)."""

    matrix = np.zeros((n, n), dtype=np.complex128)
    idx = np.arange(n - 1)
    matrix[idx, idx + 1] = 1.0
    matrix[idx + 1, idx] = 1.0
    phase = np.exp(2j * np.pi * n * c)
    matrix[n - 1, 0] += phase
    matrix[0, n - 1] += np.conj(phase)
    return matrix


def _check_mode(spec: TorusSpec, mode: ModeIndex) -> None:
    if not (0 <= mode.j < spec.n and 0 <= mode.k < spec.n):
        raise InvalidParameter(f"mode {mode} outside [0, {spec.n})^2")


def mode_eigenvalue(spec: TorusSpec, mode: ModeIndex) -> float:
    _check_mode(spec, mode)
    return 2.0 * math.cos(2.0 * math.pi * (mode.j / spec.n + spec.c)) + 2.0 * math.cos(
        2.0 * math.pi * (mode.k / spec.n + spec.d)
    )


def mode_vector(spec: TorusSpec, mode: ModeIndex) -> NDArray[np.complex128]:
    """Field ``u[x-1, y-1] = exp(2 pi i (x (j/n + c) + y (k/n + d)))``; norm n."""

    _check_mode(spec, mode)
    sites = np.arange(1, spec.n + 1)
    first = np.exp(2j * np.pi * sites * (mode.j / spec.n + spec.c))
    second = np.exp(2j * np.pi * sites * (mode.k / spec.n + spec.d))
    return np.outer(first, second)


def cycle_eigenvalues(n: int, c: float) -> NDArray[np.float64]:
    return 2.0 * np.cos(2.0 * np.pi * (np.arange(n) / n + c))


def all_eigenvalues(spec: TorusSpec) -> NDArray[np.float64]:
    """Eigenvalues indexed by ``j * n + k``."""

    rows = cycle_eigenvalues(spec.n, spec.c)
    return np.add.outer(rows, cycle_eigenvalues(spec.n, spec.d)).ravel()


# ----------------------------------------------------------------------
# Spectral measures
# ----------------------------------------------------------------------
def spectral_measure_1d(n: int, c: float, a: int) -> AtomicMeasure:
    """mu_{c,a}: atoms 2cos(2 pi (k/n + c)) with weights exp(2 pi i a (k/n + c)) / n."""

    if abs(a) >= n:
        raise InvalidParameter(f"offset {a} must satisfy |a| < n = {n}")
    phases = np.arange(n) / n + c
    return AtomicMeasure(2.0 * np.cos(2.0 * np.pi * phases), np.exp(2j * np.pi * a * phases) / n)


def spectral_measure_2d(n: int, c: float, d: float, a: int, b: int) -> AtomicMeasure:
    """mu_{c,d,a,b} = mu_{c,a} * mu_{d,b}."""

    return spectral_measure_1d(n, c, a).convolve(spectral_measure_1d(n, d, b))


def stieltjes(measure: AtomicMeasure, z: ArrayLike) -> NDArray[np.complex128] | complex:
    """m(z) = sum_i w_i / (x_i - z) for Im z > 0."""

    values = np.asarray(z, dtype=np.complex128)
    if np.any(values.imag <= 0.0):
        raise InvalidParameter("Stieltjes transform needs Im z > 0")
    return measure.stieltjes(values)


def stieltjes_derivative_check(
    measure: AtomicMeasure, z: complex, step: float | None = None
) -> float:
    """Margin g/eta - |f'| at z = lam + i eta, f = kappa_eta * nu, g = kappa_eta * |nu|.

    f' is a central difference in lam. A non-negative margin means the bound
    holds; complex measures are allowed.
    """

    if z.imag <= 0.0:
        raise InvalidParameter("derivative check needs Im z > 0")
    eta = z.imag
    h = 1e-4 * eta if step is None else step
    points = np.float64(z.real)
    forward = np.asarray(measure.smooth(eta, points + h))
    backward = np.asarray(measure.smooth(eta, points - h))
    derivative = np.abs(forward - backward) / (2.0 * h)
    return float(np.real(measure.absolute().smooth(eta, points)) / eta - derivative)


def mass_bound(n: int, lo: float, hi: float) -> float:
    """Upper bound int_{lo - 8pi/n}^{hi + 8pi/n} rho_{0,0} on mu_{c,0} * mu_{d,0}([lo, hi])."""

    slack = 8.0 * math.pi / n
    return density_integral(0, 0, max(lo - slack, -4.0), min(hi + slack, 4.0))


def counting_bracket(n: int, center: float, r: float) -> tuple[float, float]:
    """Leading terms 2 r rho(E0) -+ 16 pi/n rho(E0) of the interval-mass bracket."""

    density = rho(0, 0, center)
    slack = 16.0 * math.pi / n * density
    return 2.0 * r * density - slack, 2.0 * r * density + slack


# ----------------------------------------------------------------------
# Regularity under random boundary conditions
# ----------------------------------------------------------------------
@dataclass(slots=True)
class RegularityEstimate:
    """Integrated variance of the smoothed spectral measure and its reference pi/(2 n^2 eta)."""

    integral: float
    reference: float
    trials: int

    @property
    def ratio(self) -> float:
        return self.integral / self.reference


def regularity_grid(eta: float, margin: float = 30.0, density: float = 4.0) -> NDArray[np.float64]:
    """Grid covering [-4 - margin eta, 4 + margin eta] with spacing eta / density."""

    half = 4.0 + margin * eta
    count = int(math.ceil(2.0 * half * density / eta)) + 1
    return np.linspace(-half, half, count)


def smoothed_sample(
    n: int, c: float, d: float, a: int, b: int, eta: float, grid: NDArray[np.float64]
) -> NDArray:
    """kappa_eta * mu_{c,d,a,b} on ``grid`` for one boundary draw."""

    return np.asarray(spectral_measure_2d(n, c, d, a, b).smooth(eta, grid))


def integrated_variance(samples: ArrayLike, grid: ArrayLike) -> float:
    """Trapezoid integral over ``grid`` of the unbiased pointwise variance of ``samples``.

    ``samples`` has one row per trial; rows are combined in order.
    """

    stack = np.asarray(samples)
    if stack.ndim != 2 or stack.shape[0] < 2:
        raise InvalidParameter("at least two trials are needed for a variance")
    centered = stack - stack.mean(axis=0)
    variance = np.sum(np.abs(centered) ** 2, axis=0) / (stack.shape[0] - 1)
    return float(np.trapezoid(variance, np.asarray(grid, dtype=np.float64)))


def variance_regularity_estimate(
    n: int,
    eta: float,
    a: int = 0,
    b: int = 0,
    *,
    trials: int,
    rng: np.random.Generator,
    lambda_grid: ArrayLike | None = None,
    boundary_draws: ArrayLike | None = None,
    epsilon: float = 0.05,
) -> RegularityEstimate:
    """Monte-Carlo integral of Var(kappa_eta * mu_{C,D,a,b}) over a lambda grid.

    ``boundary_draws`` (trials x 2) replaces the uniform (C, D) draws.
    """

    if trials < 2:
        raise InvalidParameter("at least two trials are needed for a variance")
    if not n**-2 <= eta <= n**2:
        raise InvalidParameter(f"eta={eta} outside [n^-2, n^2] for n={n}")
    if abs(a) + abs(b) > n ** (0.5 - 2.0 * epsilon):
        LOG.warning(
            "offset |a|+|b|=%d exceeds n^(1/2-2eps)=%.2f",
            abs(a) + abs(b),
            n ** (0.5 - 2.0 * epsilon),
        )
    if lambda_grid is None:
        grid = regularity_grid(eta)
    else:
        grid = np.asarray(lambda_grid, dtype=np.float64)
    if boundary_draws is None:
        draws = rng.random((trials, 2))
    else:
        draws = np.asarray(boundary_draws, dtype=np.float64).reshape(trials, 2)
    samples = [smoothed_sample(n, float(c), float(d), a, b, eta, grid) for c, d in draws]
    integral = integrated_variance(samples, grid)
    return RegularityEstimate(
        integral=integral, reference=math.pi / (2.0 * n * n * eta), trials=trials
    )


# ----------------------------------------------------------------------
# Close pairs
# ----------------------------------------------------------------------
@dataclass(slots=True)
class ClosePairsResult:
    """Mean over trials of sum_J count_J^2 for length-n^-2 bins J covering [E - r, E + r)."""

    statistic: float
    n: int
    energy: float
    r: float
    bins: int
    trials: int

    @property
    def normalized(self) -> float:
        return self.statistic / (self.n * self.n * self.r)


def close_pairs_statistic(
    n: int,
    energy: float,
    r: float,
    trials: int,
    rng: np.random.Generator,
    *,
    boundary_draws: ArrayLike | None = None,
) -> ClosePairsResult:
    """Monte-Carlo mean of sum_J count_J^2 over bins [E - r + i/n^2, E - r + (i+1)/n^2).

    ``r`` is rounded so that ``n * r`` is an integer.
    """

    if not 0.0 < energy < 4.0:
        raise InvalidParameter(f"energy must lie in (0, 4), got {energy}")
    steps = max(1, round(n * r))
    r_used = steps / n
    if not math.isclose(r_used, r, rel_tol=0.0, abs_tol=1e-12):
        LOG.warning("close-pairs window r=%g rounded to %g so that n*r is an integer", r, r_used)
    bins = 2 * steps * n
    lo = energy - r_used
    if boundary_draws is None:
        draws = rng.random((trials, 2))
    else:
        draws = np.asarray(boundary_draws, dtype=np.float64).reshape(trials, 2)
    total = 0.0
    for c, d in draws:
        rows = cycle_eigenvalues(n, float(c))
        eigenvalues = np.add.outer(rows, cycle_eigenvalues(n, float(d))).ravel()
        index = np.floor((eigenvalues - lo) * (n * n)).astype(np.int64)
        index = index[(index >= 0) & (index < bins)]
        counts = np.bincount(index, minlength=bins)
        total += float(np.sum(counts.astype(np.float64) ** 2))
    return ClosePairsResult(
        statistic=total / trials, n=n, energy=energy, r=r_used, bins=bins, trials=trials
    )


def torus_B_entry(  # noqa: N802
    spec: TorusSpec, t: float, eta: float, lam: float, a: int, b: int
) -> complex:
    """(t/eta) kappa_eta * mu_{c,d,a,b} (lam).

    This is the entry of t((A - lam)^2 + eta^2)^-1 at offset (a, b).
    """

    if t <= 0.0 or eta <= 0.0:
        raise InvalidParameter("t and eta must be positive")
    measure = spectral_measure_2d(spec.n, spec.c, spec.d, a, b)
    return complex(t / eta * measure.smooth(eta, lam))


# ----------------------------------------------------------------------
# Nice boundary pairs
# ----------------------------------------------------------------------
@dataclass(frozen=True, slots=True)
class NiceParameters:
    """Scales derived from (n, E, epsilon, gamma)."""

    n: int
    energy: float
    epsilon: float
    gamma: float
    t: float
    ell: float
    bound: float
    eta_lower: float | None
    eta_upper: float
    etas: tuple[float, ...]
    offsets: tuple[tuple[int, int], ...]


def check_scale_constraints(epsilon: float, gamma: float) -> None:
    """Raise unless 15 eps < min(2(1 - gamma - eps), 1/6) and 8 eps < gamma."""

    if epsilon <= 0.0:
        raise InvalidParameter(f"epsilon must be positive, got {epsilon}")
    if not 15.0 * epsilon < min(2.0 * (1.0 - gamma - epsilon), 1.0 / 6.0):
        raise InvalidParameter(
            f"violated 15*eps < min(2(1-gamma-eps), 1/6) with eps={epsilon}, gamma={gamma}"
        )
    if not 8.0 * epsilon < gamma:
        raise InvalidParameter(f"violated 8*eps < gamma with eps={epsilon}, gamma={gamma}")


def nice_parameters(n: int, energy: float, epsilon: float, gamma: float) -> NiceParameters:
    check_scale_constraints(epsilon, gamma)
    t = n ** (-2.0 * gamma)
    ell = 2.0 * n ** (-3.0 * epsilon)
    density = math.pi * rho(0, 0, energy)
    eta_lower: float | None = (density - n**-epsilon) * t
    eta_upper = (density + n**-epsilon) * t
    if eta_lower is not None and eta_lower <= 0.0:
        LOG.warning(
            "eta_lower=(pi rho(E) - n^-eps) t = %.3e is not positive at n=%d; dropped", eta_lower, n
        )
        eta_lower = None
    base = t * n ** (-2.0 * epsilon)
    ladder = [base]
    while ladder[-1] < 10.0:
        ladder.append(2.0 * ladder[-1])
    etas = tuple(([eta_lower] if eta_lower is not None else []) + [eta_upper] + ladder)
    reach = int(math.floor(n**epsilon))
    offsets = tuple(
        (a, b)
        for a in range(-reach, reach + 1)
        for b in range(-reach, reach + 1)
        if abs(a) + abs(b) <= reach
    )
    return NiceParameters(
        n=n,
        energy=energy,
        epsilon=epsilon,
        gamma=gamma,
        t=t,
        ell=ell,
        bound=2.0 * ell * n ** (-9.0 * epsilon),
        eta_lower=eta_lower,
        eta_upper=eta_upper,
        etas=etas,
        offsets=offsets,
    )


@dataclass(slots=True)
class NicePairReport:
    ok: bool
    worst_margin: float
    integrals: NDArray[np.float64]
    parameters: NiceParameters
    c: float = 0.0
    d: float = 0.0


class NicePairChecker:
    """Evaluates the niceness predicate for many (c, d) at fixed (n, E, eps, gamma).

    The lattice references kappa_eta * rho_{a,b} do not depend on (c, d) and
    are computed once.
    """

    def __init__(
        self, n: int, energy: float, epsilon: float, gamma: float, *, grid_size: int = 4096
    ) -> None:
        self.parameters = nice_parameters(n, energy, epsilon, gamma)
        self.grid_size = grid_size
        self._grids: list[NDArray[np.float64]] = []
        self._references: list[NDArray[np.float64]] = []
        for eta in self.parameters.etas:
            grid = np.linspace(-8.0 - 3.0 * eta, 8.0 + 3.0 * eta, grid_size)
            cache: dict[tuple[int, int], NDArray[np.float64]] = {}
            columns = []
            for a, b in self.parameters.offsets:
                key = tuple(sorted((abs(a), abs(b))))
                if key not in cache:
                    cache[key] = smoothed_rho(key[0], key[1], eta, grid)
                columns.append(cache[key])
            self._grids.append(grid)
            self._references.append(np.stack(columns, axis=1))

    def check(self, c: float, d: float) -> NicePairReport:
        params = self.parameters
        n = params.n
        measure = spectral_measure_2d(n, c, d, 0, 0)
        weights = np.stack(
            [spectral_measure_2d(n, c, d, a, b).weights for a, b in params.offsets], axis=1
        )
        integrals = np.empty((len(params.etas), len(params.offsets)))
        for row, (eta, grid, reference) in enumerate(
            zip(params.etas, self._grids, self._references, strict=True)
        ):
            smoothed = np.empty(reference.shape, dtype=np.complex128)
            for start in range(0, grid.size, _BLOCK):
                block = grid[start : start + _BLOCK]
                diff = measure.locations[None, :] - block[:, None]
                smoothed[start : start + _BLOCK] = (eta / (diff * diff + eta * eta)) @ weights
            integrals[row] = np.trapezoid(np.abs(reference - smoothed) ** 2, grid, axis=0)
        worst = float(params.bound - integrals.max())
        return NicePairReport(
            ok=worst >= 0.0, worst_margin=worst, integrals=integrals, parameters=params, c=c, d=d
        )


def nice_pair_check(
    n: int, c: float, d: float, energy: float, epsilon: float, gamma: float
) -> tuple[bool, float]:
    report = NicePairChecker(n, energy, epsilon, gamma).check(c, d)
    return report.ok, report.worst_margin


# ----------------------------------------------------------------------
# Hypotheses of the quenched eigenvector theorem
# ----------------------------------------------------------------------
@dataclass(slots=True)
class ConditionReport:
    """Empirical failure probabilities over lambda uniform in [E - ell, E + ell]."""

    energy: float
    ell: float
    t: float
    epsilon: float
    etas: list[float]
    eta_lower: float | None
    eta_upper: float
    c: float
    fitted_c: float
    regularity_failure: float
    lower_failure: float | None
    upper_failure: float
    limit_failure: dict[str, float] = field(default_factory=dict)
    monotone: bool = True
    samples: int = 0

    def as_dict(self) -> dict[str, object]:
        return {
            "energy": self.energy,
            "ell": self.ell,
            "t": self.t,
            "epsilon": self.epsilon,
            "etas": list(self.etas),
            "eta_lower": self.eta_lower,
            "eta_upper": self.eta_upper,
            "c": self.c,
            "fitted_c": self.fitted_c,
            "regularity_failure": self.regularity_failure,
            "lower_failure": self.lower_failure,
            "upper_failure": self.upper_failure,
            "limit_failure": dict(self.limit_failure),
            "monotone": self.monotone,
            "samples": self.samples,
        }


def window_condition_report(
    spec: TorusSpec,
    energy: float,
    ell: float,
    t: float,
    epsilon: float,
    *,
    rng: np.random.Generator,
    samples: int = 200,
    c: float = 10.0,
    delta: float = 0.1,
    offsets: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1)),
) -> ConditionReport:
    """Failure rates of the regularity, two-sided and limit conditions on a spectral window.

    With N = n^2: eta ranges over the dyadic set t N^-eps 2^k (up to the first
    value >= 20), eta_lower/upper = (pi rho(E) -+ N^(-eps/2)) t, and the
    two-sided events compare Im m against eta/t +- N^-eps.
    """

    big_n = spec.dim
    if not big_n ** (epsilon - 1.0) <= t <= big_n ** (-2.0 * epsilon):
        LOG.warning("t=%g outside [N^(eps-1), N^(-2eps)] for N=%d", t, big_n)
    lams = energy + ell * (2.0 * rng.random(samples) - 1.0)
    measure = spectral_measure_2d(spec.n, spec.c, spec.d, 0, 0)

    etas = [t * big_n**-epsilon]
    while etas[-1] < 20.0:
        etas.append(2.0 * etas[-1])
    im_m = np.stack([np.asarray(measure.smooth(eta, lams)) for eta in etas])
    outside = (im_m <= 1.0 / c) | (im_m >= c)
    scaled = np.asarray(etas)[:, None] * im_m
    monotone = bool(np.all(np.diff(scaled, axis=0) >= -1e-12 * np.abs(scaled[1:])))
    fitted = float(max(im_m.max(), 1.0 / im_m.min()))

    density = math.pi * rho(0, 0, energy)
    eta_lower: float | None = (density - big_n ** (-0.5 * epsilon)) * t
    eta_upper = (density + big_n ** (-0.5 * epsilon)) * t
    lower_failure: float | None = None
    if eta_lower is not None and eta_lower > 0.0:
        low = np.asarray(measure.smooth(eta_lower, lams))
        lower_failure = float(np.mean(low <= eta_lower / t + big_n**-epsilon))
    else:
        LOG.warning(
            "eta_lower is not positive for N=%d, eps=%g; lower condition skipped", big_n, epsilon
        )
        eta_lower = None
    high = np.asarray(measure.smooth(eta_upper, lams))
    upper_failure = float(np.mean(high >= eta_upper / t - big_n**-epsilon))

    base = rho(0, 0, energy)
    limit_failure: dict[str, float] = {}
    for a, b in offsets:
        target = rho(a, b, energy) / base
        offset_measure = spectral_measure_2d(spec.n, spec.c, spec.d, a, b)
        rates = []
        for eta in [e for e in (eta_lower, eta_upper) if e is not None]:
            entries = t / eta * np.asarray(offset_measure.smooth(eta, lams))
            rates.append(float(np.mean(np.abs(entries - target) > delta)))
        limit_failure[f"{a},{b}"] = max(rates)

    return ConditionReport(
        energy=energy,
        ell=ell,
        t=t,
        epsilon=epsilon,
        etas=etas,
        eta_lower=eta_lower,
        eta_upper=eta_upper,
        c=c,
        fitted_c=fitted,
        regularity_failure=float(outside.mean(axis=1).max()),
        lower_failure=lower_failure,
        upper_failure=upper_failure,
        limit_failure=limit_failure,
        monotone=monotone,
        samples=samples,
    )


# ----------------------------------------------------------------------
# Sums of roots of unity
# ----------------------------------------------------------------------
def roots_of_unity_close_prob(n: int, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo P(|Re(xi_1 + ... + xi_4)| < 1/n^2) for uniform n-th roots of unity."""

    if n < 1:
        raise InvalidParameter(f"n must be positive, got {n}")
    k = rng.integers(0, n, size=(trials, 4))
    sums = np.cos(2.0 * np.pi * k / n).sum(axis=1)
    return float(np.mean(np.abs(sums) < 1.0 / (n * n)))


def roots_of_unity_close_exact(n: int) -> float:
    """The same probability by enumerating pair sums (O(n^2 log n))."""

    if n < 1:
        raise InvalidParameter(f"n must be positive, got {n}")
    cosines = np.cos(2.0 * np.pi * np.arange(n) / n)
    pairs = np.sort(np.add.outer(cosines, cosines).ravel())
    radius = 1.0 / (n * n)
    # |p + q| < radius  <=>  -q - radius < p < -q + radius
    upper = np.searchsorted(pairs, -pairs + radius, side="left")
    lower = np.searchsorted(pairs, -pairs - radius, side="right")
    return float(np.sum(upper - lower)) / float(n**4)
