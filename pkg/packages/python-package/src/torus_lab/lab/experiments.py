"""End-to-end experiments behind the ``torus-lab`` subcommands.

Every experiment fills a :class:`RunRecord` with tables and checks; the
caller persists it.  Random numbers come only from the trial runner, so a
run is a function of its configuration and master seed.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from ..errors import ConfigError, InvalidParameter
from ..fourier_diagnostic import (
    calibrate_threshold,
    max_ratios,
    near_curve_mask,
    wave_fourier_variance,
    wave_fourier_variance_table,
)
from ..free_convolution import (
    FreeConvState,
    fc_cdf,
    fc_density,
    fc_mass,
    fc_quantiles,
    fc_table,
    sigma_sq,
    v_t,
)
from ..gaussian_wave import (
    Window,
    covariance_distance,
    eigen_residual,
    empirical_covariance,
    entry_correlation,
    field_to_csv,
    sample_wave,
    wave_covariance,
)
from ..measures import AtomicMeasure
from ..random_matrix import (
    EigenSystem,
    concentration_statistic,
    eigenvector_projection_samples,
    hermitian_eig,
    perturb,
    torus_diagonal,
    window_eigenpairs,
)
from ..resolvent_flow import (
    DEFAULT_ETA,
    FlowObservable,
    FlowState,
    drift_residual,
    euler_order_ratio,
    qv_check,
    simulate_path,
    stopping_time_experiment,
)
from ..spectral_density import (
    DEFAULT_TOL,
    default_grid,
    density_integral,
    log_singularity_bound,
    rho,
    rho_grid,
    tabulate_arcsine,
    tabulate_rho,
)
from ..torus_spectrum import (
    NicePairChecker,
    NicePairReport,
    TorusSpec,
    all_eigenvalues,
    close_pairs_statistic,
    integrated_variance,
    regularity_grid,
    smoothed_sample,
    window_condition_report,
)
from .artifacts import RunDirectory, ensure_run_directory
from .config import ExperimentConfig
from .records import RunRecord
from .render import render_levelset
from .runner import TrialContext, TrialRunner, successful

LOG = logging.getLogger(__name__)

Experiment = Callable[[ExperimentConfig, TrialRunner, RunDirectory, RunRecord], None]


def _label(value: float) -> str:
    return f"{value:g}"


# ----------------------------------------------------------------------
# Densities and Gaussian waves
# ----------------------------------------------------------------------
def cmd_rho(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Tabulate rho_{a,b} and d_a; check normalization, the neighbour sum and the log bound."""

    tol = config.tolerance("rho", DEFAULT_TOL)
    grid = default_grid(config.grid_size)
    for a, b in config.offsets:
        density = tabulate_rho(a, b, grid, tol)
        record.add_artifact(density.to_csv(run_dir.path / f"rho_{a}_{b}.csv"))
    for a in sorted({abs(v) for pair in config.offsets for v in pair}):
        record.add_artifact(tabulate_arcsine(a).to_csv(run_dir.path / f"arcsine_{a}.csv"))
    record.derived["grid_points"] = int(grid.size)

    normalization = density_integral(0, 0, -4.0, 4.0, tol=config.tolerance("integral", 1e-9))
    table = record.table("rho_checks", ["quantity", "energy", "value"])
    table.add_row("integral_rho_0_0", "", normalization)
    record.check(
        "rho_0_0 integrates to one",
        abs(normalization - 1.0) <= config.tolerance("normalization", 1e-6),
        abs(normalization - 1.0),
        "<= 1e-6",
    )

    worst = 0.0
    for energy in (-3.0, -2.0, -1.0, 1.0, 2.0, 3.0):
        residual = abs(4.0 * rho(1, 0, energy, 1e-10) - energy * rho(0, 0, energy, 1e-10))
        table.add_row("neighbour_sum_residual", energy, residual)
        worst = max(worst, residual)
    record.check(
        "4 rho_1_0 = E rho_0_0",
        worst <= config.tolerance("neighbour_sum", 1e-6),
        worst,
        "<= 1e-6",
    )

    bounded = default_grid(1000)
    excess = float(np.max(rho_grid(0, 0, bounded, tol) - log_singularity_bound(bounded)))
    table.add_row("max_rho_minus_log_bound", "", excess)
    record.check("rho_0_0 <= log(100/|x|)", excess <= 0.0, excess, "<= 0")


def cmd_wave_sample(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Sample the Gaussian wave and compare the empirical window covariance with M(E)."""

    window = Window(config.half_width)
    covariance = wave_covariance(config.energy, window, config.tolerance("rho", DEFAULT_TOL))
    count = config.trials or 10_000
    batch = int(config.option("batch", 1000))
    batches = math.ceil(count / batch)

    def trial(ctx: TrialContext) -> NDArray[np.complex128]:
        size = min(batch, count - ctx.index * batch)
        return sample_wave(covariance, size, ctx.rng)

    chunks = successful(runner.run(trial, batches))
    if not chunks:
        record.check("wave samples drawn", False)
        return
    fields = np.concatenate(chunks)
    estimate = empirical_covariance(fields)
    max_abs, frob_rel = covariance_distance(estimate, covariance)
    residual = float(np.max(np.abs(eigen_residual(fields[:10], config.energy)), initial=0.0))

    record.derived.update(
        samples=int(fields.shape[0]),
        window_size=window.size,
        min_eigenvalue=covariance.min_eigenvalue,
    )
    record.add_artifact(covariance.to_csv(run_dir.path / "wave_covariance.csv"))
    record.add_artifact(
        field_to_csv(fields[0], run_dir.path / "wave_field_0.csv", energy=config.energy)
    )
    centre = window.index(0, 0)
    table = record.table(
        "wave_covariance_estimate", ["dx", "dy", "target", "re_estimate", "im_estimate"]
    )
    for (dx, dy), target, value in zip(
        window.offsets, covariance.entries[:, centre], estimate[:, centre], strict=True
    ):
        table.add_row(int(dx), int(dy), float(target), float(value.real), float(value.imag))
    summary = record.table(
        "wave_summary", ["samples", "max_abs", "frob_rel", "max_interior_residual"]
    )
    summary.add_row(int(fields.shape[0]), max_abs, frob_rel, residual)

    record.check(
        "wave covariance is PSD",
        covariance.min_eigenvalue >= -config.tolerance("psd", 1e-6),
        covariance.min_eigenvalue,
        ">= -1e-6",
    )
    factor = config.tolerance("wave_stderr_factor", 6.0)
    record.check(
        "empirical covariance matches M(E)",
        max_abs <= factor / math.sqrt(fields.shape[0]),
        max_abs,
        f"<= {factor}/sqrt(samples)",
    )


# ----------------------------------------------------------------------
# Phase transition
# ----------------------------------------------------------------------
@dataclass(slots=True)
class PhaseTrial:
    window_fields: NDArray[np.complex128]
    ratios: NDArray[np.float64]
    first_field: NDArray[np.complex128]


def _window_fields(
    spec: TorusSpec,
    gamma: float,
    config: ExperimentConfig,
    rng: np.random.Generator,
) -> NDArray[np.complex128]:
    """Eigenvectors of A_{c,d} + sqrt(t) W with eigenvalue in [E - n^-delta, E + n^-delta).

    Returned as n x n fields of norm n.
    """

    n = spec.n
    t = config.time_for(n, gamma)
    system = hermitian_eig(perturb(spec.adjacency(), t, rng))
    reach = n ** -config.delta
    pairs = window_eigenpairs(system, (config.energy - reach, config.energy + reach), float(n), rng)
    return pairs.eigenvectors.T.reshape(-1, n, n)


def _centre_block(fields: NDArray[np.complex128], half_width: int) -> NDArray[np.complex128]:
    n = fields.shape[1]
    origin = n // 2
    if origin - half_width < 0 or origin + half_width >= n:
        raise InvalidParameter(f"window half-width {half_width} does not fit a {n}x{n} torus")
    block = slice(origin - half_width, origin + half_width + 1)
    return fields[:, block, block]


def _threshold_factor(config: ExperimentConfig, runner: TrialRunner) -> float:
    if config.threshold_factor is not None:
        return config.threshold_factor
    return calibrate_threshold(
        config.energy,
        config.ell,
        runner.context(0, "calibration").rng,
        false_positive=float(config.option("false_positive", 0.01)),
        samples=int(config.option("calibration_samples", 500)),
    )


def cmd_phase_scan(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Window covariance and dominant Fourier coefficients of eigenvectors across gamma."""

    n = config.sides(default=32)[0]
    if config.ell > n:
        raise ConfigError(f"ell={config.ell} exceeds the torus side n={n}")
    trials = config.trials or 10
    gammas = config.gamma_list(default=(0.5, 1.5))
    target = wave_covariance(config.energy, Window(config.half_width))
    factor = _threshold_factor(config, runner)

    baseline_count = int(config.option("baseline_samples", 1000))
    baseline_fields = sample_wave(
        wave_covariance(config.energy, Window(config.ell // 2)),
        baseline_count,
        runner.context(0, "baseline").rng,
    )
    baseline_rate = float(np.mean(max_ratios(baseline_fields, config.ell) >= factor))
    record.derived.update(n=n, threshold_factor=factor, baseline_samples=baseline_count)
    baseline = record.table("wave_baseline", ["threshold_factor", "samples", "rate"])
    baseline.add_row(factor, baseline_count, baseline_rate)

    table = record.table(
        "phase_scan",
        [
            "gamma",
            "t",
            "eigenvectors",
            "correlation",
            "max_abs",
            "frob_rel",
            "dominant_fraction",
            "median_ratio",
        ],
    )
    for gamma in gammas:
        t = config.time_for(n, gamma)

        def trial(ctx: TrialContext, gamma: float = gamma) -> PhaseTrial:
            spec = TorusSpec.random(n, ctx.rng)
            fields = _window_fields(spec, gamma, config, ctx.rng)
            return PhaseTrial(
                window_fields=_centre_block(fields, config.half_width),
                ratios=max_ratios(fields, config.ell),
                first_field=fields[0],
            )

        results = successful(runner.run(trial, trials, label=f"gamma={_label(gamma)}"))
        if not results:
            record.check(f"gamma={_label(gamma)} produced eigenvectors", False)
            continue
        pooled = np.concatenate([r.window_fields for r in results])
        ratios = np.concatenate([r.ratios for r in results])
        estimate = empirical_covariance(pooled)
        correlation = entry_correlation(estimate, target.entries)
        max_abs, frob_rel = covariance_distance(estimate, target)
        fraction = float(np.mean(ratios >= factor))
        table.add_row(
            gamma,
            t,
            int(pooled.shape[0]),
            correlation,
            max_abs,
            frob_rel,
            fraction,
            float(np.median(ratios)),
        )
        if config.option("images", False):
            path = run_dir.path / f"levelset_gamma_{_label(gamma)}.ppm"
            record.add_artifact(
                render_levelset(results[0].first_field, path, scale=config.pixel_scale)
            )

        if gamma < 1.0:
            record.check(
                f"gamma={_label(gamma)}: covariance correlation with M(E)",
                correlation >= config.tolerance("correlation", 0.9),
                correlation,
                ">= 0.9",
            )
            record.check(
                f"gamma={_label(gamma)}: pooled eigenvectors",
                pooled.shape[0] >= 200,
                float(pooled.shape[0]),
                ">= 200",
                acceptance=False,
            )
        elif gamma > 1.0:
            record.check(
                f"gamma={_label(gamma)}: dominant fraction",
                fraction > config.tolerance("dominant_fraction", 0.25),
                fraction,
                "> 0.25",
            )
    if any(gamma > 1.0 for gamma in gammas):
        record.check(
            "wave baseline rate",
            baseline_rate <= config.tolerance("baseline_rate", 0.05),
            baseline_rate,
            "<= 0.05",
        )


def cmd_render(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Level sets of Re(u) for the eigenvector nearest E as the noise grows, plus a wave sample."""

    n = config.sides(default=32)[0]
    gammas = config.gamma_list(default=(0.25, 0.75, 1.25, 1.75))
    suffix = str(config.option("format", "ppm")).lstrip(".")
    bands = config.option("bands", None)
    spec = TorusSpec.random(n, runner.context(0, "boundary").rng)
    record.derived.update(n=n, c=spec.c, d=spec.d)
    table = record.table("render", ["gamma", "t", "eigenvalue", "image"])

    def trial(ctx: TrialContext) -> tuple[float, NDArray[np.complex128]]:
        gamma = gammas[ctx.index]
        system = hermitian_eig(perturb(spec.adjacency(), config.time_for(n, gamma), ctx.rng))
        index = int(np.argmin(np.abs(system.eigenvalues - config.energy)))
        return float(system.eigenvalues[index]), n * system.eigenvectors[:, index].reshape(n, n)

    for outcome in runner.run(trial, len(gammas), label="gamma"):
        if not outcome.ok or outcome.value is None:
            continue
        gamma = gammas[outcome.index]
        eigenvalue, field = outcome.value
        path = run_dir.path / f"levelset_gamma_{_label(gamma)}.{suffix}"
        render_levelset(field, path, scale=config.pixel_scale, bands=bands)
        record.add_artifact(path)
        table.add_row(gamma, config.time_for(n, gamma), eigenvalue, path.name)

    wave = sample_wave(
        wave_covariance(config.energy, Window(n // 2)), 1, runner.context(0, "wave").rng
    )[0]
    path = run_dir.path / f"levelset_wave.{suffix}"
    render_levelset(wave, path, scale=config.pixel_scale, bands=bands)
    record.add_artifact(path)
    table.add_row("wave", "", config.energy, path.name)
    record.check("all images written", len(table.rows) == len(gammas) + 1, acceptance=False)


# ----------------------------------------------------------------------
# Random boundary conditions
# ----------------------------------------------------------------------
def cmd_regularity(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Integrated variance of the smoothed spectral measure against pi / (2 n^2 eta)."""

    sides = config.sides(default=(32, 64, 128))
    trials = config.trials or 200
    a = int(config.option("a", 0))
    b = int(config.option("b", 0))
    table = record.table("regularity", ["n", "eta", "integral", "reference", "ratio"])
    ratios: dict[int, float] = {}
    for n in sides:
        eta = config.eta if config.eta is not None else 1.0 / n
        grid = regularity_grid(eta)

        def trial(
            ctx: TrialContext, n: int = n, eta: float = eta, grid: NDArray[np.float64] = grid
        ) -> NDArray:
            c, d = ctx.rng.random(2)
            return smoothed_sample(n, float(c), float(d), a, b, eta, grid)

        samples = successful(runner.run(trial, trials, label=f"n={n}"))
        if len(samples) < 2:
            record.check(f"n={n}: enough trials", False)
            continue
        integral = integrated_variance(samples, grid)
        reference = math.pi / (2.0 * n * n * eta)
        ratios[n] = integral / reference
        table.add_row(n, eta, integral, reference, ratios[n])
    if not ratios:
        return
    largest, smallest = max(ratios), min(ratios)
    record.check(
        f"n={largest}: ratio in [0.5, 1.5]",
        config.tolerance("ratio_low", 0.5)
        <= ratios[largest]
        <= config.tolerance("ratio_high", 1.5),
        ratios[largest],
        "[0.5, 1.5]",
    )
    if largest != smallest:
        record.check(
            "ratio approaches one as n grows",
            abs(ratios[largest] - 1.0) < abs(ratios[smallest] - 1.0),
            abs(ratios[largest] - 1.0),
            f"< {abs(ratios[smallest] - 1.0):.4g}",
        )
    if config.option("hypotheses", False):
        _torus_hypotheses(config, runner, record)


def _torus_hypotheses(config: ExperimentConfig, runner: TrialRunner, record: RunRecord) -> None:
    """Share of nice boundary pairs and window-condition failure rates at one size."""

    n = int(config.option("hypotheses_n", 64))
    gamma = config.gamma if config.gamma is not None else 0.5
    checker = NicePairChecker(n, config.energy, config.epsilon, gamma)

    def trial(ctx: TrialContext) -> NicePairReport:
        c, d = ctx.rng.random(2)
        return checker.check(float(c), float(d))

    reports = successful(runner.run(trial, int(config.option("nice_trials", 20)), label="nice"))
    if not reports:
        record.check("nice pair trials", False)
        return
    fraction = float(np.mean([report.ok for report in reports]))
    worst = min(report.worst_margin for report in reports)
    record.table("nice_pairs", ["n", "trials", "fraction", "worst_margin"]).add_row(
        n, len(reports), fraction, worst
    )
    floor = config.tolerance("nice_fraction", 0.9)
    record.check("nice boundary pairs", fraction >= floor, fraction, f">= {floor}")

    params = checker.parameters
    window = window_condition_report(
        TorusSpec.random(n, runner.context(0, "window").rng),
        config.energy,
        params.ell,
        params.t,
        config.epsilon,
        rng=runner.context(1, "window").rng,
    )
    record.derived["window_conditions"] = window.as_dict()
    record.check("eta Im m increases with eta", window.monotone)
    ceiling = config.tolerance("window_failure", 0.05)
    failures = [window.upper_failure]
    if window.lower_failure is not None:
        failures.append(window.lower_failure)
    record.check(
        "two-sided window conditions",
        max(failures) <= ceiling,
        max(failures),
        f"<= {ceiling}",
        acceptance=False,
    )


def cmd_close_pairs(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Mean of sum_J count_J^2 over length-n^-2 bins near E, normalized by n^2 r."""

    sides = config.sides(default=(64, 128, 256))
    trials = config.trials or 20
    r = config.r if config.r is not None else 0.25
    table = record.table("close_pairs", ["n", "r", "bins", "statistic", "normalized"])
    normalized: list[float] = []
    for n in sides:

        def trial(ctx: TrialContext, n: int = n) -> tuple[float, float, int]:
            result = close_pairs_statistic(n, config.energy, r, 1, ctx.rng)
            return result.statistic, result.r, result.bins

        values = successful(runner.run(trial, trials, label=f"n={n}"))
        if not values:
            record.check(f"n={n}: close-pair trials", False)
            continue
        statistic = float(np.mean([v[0] for v in values]))
        r_used, bins = values[0][1], values[0][2]
        normalized.append(statistic / (n * n * r_used))
        table.add_row(n, r_used, bins, statistic, normalized[-1])
    if len(normalized) > 1:
        spread = max(normalized) / min(normalized)
        record.check(
            "statistic / (n^2 r) stable across n",
            spread <= config.tolerance("close_pairs_spread", 2.0),
            spread,
            "<= 2",
        )


def cmd_concentration(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Overlap of perturbed eigenvectors with stable unperturbed torus modes."""

    n = config.sides(default=48)[0]
    dim = n * n
    t = config.t if config.t is not None else float(dim) ** -1.5
    half = float(config.option("window", 0.1))
    e_lower, e_upper = config.energy - half, config.energy + half
    trials = config.trials or 10
    record.derived.update(n=n, dim=dim, t=t, e_lower=e_lower, e_upper=e_upper)

    def unperturbed(spec: TorusSpec) -> EigenSystem:
        eigenvalues = all_eigenvalues(spec)
        order = np.argsort(eigenvalues, kind="stable")
        return EigenSystem(eigenvalues[order], np.eye(dim, dtype=np.complex128)[:, order])

    def trial(ctx: TrialContext) -> dict[str, float | int]:
        spec = TorusSpec.random(n, ctx.rng)
        start = unperturbed(spec)
        end = hermitian_eig(perturb(torus_diagonal(spec), t, ctx.rng))
        return concentration_statistic(start, end, e_lower, e_upper, t).as_dict()

    results = successful(runner.run(trial, trials))
    table = record.table("concentration", ["trial", "lhs", "k_size", "k2_size", "b", "bound"])
    for index, row in enumerate(results):
        table.add_row(index, row["lhs"], row["k_size"], row["k2_size"], row["b"], row["bound"])
    if results:
        mean_lhs = float(np.mean([r["lhs"] for r in results]))
        mean_bound = float(np.mean([r["bound"] for r in results]))
        record.check(
            "mean overlap >= 0.8 |K|/b",
            mean_lhs >= config.tolerance("concentration_factor", 0.8) * mean_bound,
            mean_lhs,
            f">= {0.8 * mean_bound:.4g}",
        )
    else:
        record.check("concentration trials", False)

    identity_spec = TorusSpec.random(n, runner.context(0, "identity").rng)
    start = unperturbed(identity_spec)
    identity = concentration_statistic(start, start, e_lower, e_upper, 0.0)
    table.add_row(
        "t=0", identity.lhs, identity.k_size, identity.k2_size, identity.b, identity.bound
    )
    record.check(
        "t=0 overlap equals |K|/b", identity.lhs == identity.bound, identity.lhs, "== |K|/b"
    )


# ----------------------------------------------------------------------
# Free convolution and the Dyson flow
# ----------------------------------------------------------------------
def _spaced(n: int) -> NDArray[np.float64]:
    return np.linspace(-1.0, 1.0, n)


def cmd_free_conv(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Closed forms for a point mass, mass of p_t and agreement with sampled spectra."""

    t = config.t if config.t is not None else 0.1
    checks = record.table("free_conv_checks", ["quantity", "value", "expected"])

    point = FreeConvState(AtomicMeasure.point_mass(), t)
    density = float(fc_density(point, 0.0))
    height = 1.0 / (math.pi * math.sqrt(t))
    checks.add_row("p_t(0)", density, height)
    gap = abs(density - height)
    record.check("point mass: p_t(0) = 1/(pi sqrt t)", gap <= 1e-6, gap, "<= 1e-6")
    v = float(v_t(point, 0.0))
    checks.add_row("v_t(0)", v, math.sqrt(t))
    gap = abs(v - math.sqrt(t))
    record.check("point mass: v_t(0) = sqrt t", gap <= 1e-8, gap, "<= 1e-8")
    gammas = fc_quantiles(point, 100).gammas
    asymmetry = float(np.max(np.abs(gammas + gammas[::-1])))
    checks.add_row("quantile_asymmetry", asymmetry, 0.0)
    record.check("point mass: symmetric quantiles", asymmetry <= 1e-8, asymmetry, "<= 1e-8")

    measures = {
        "five_atoms": AtomicMeasure.empirical(np.linspace(-1.0, 1.0, 5)),
        "skewed": AtomicMeasure(np.array([-1.0, 0.5, 2.0]), np.array([0.2, 0.5, 0.3])),
    }
    for name, measure in measures.items():
        mass = fc_mass(FreeConvState(measure, t))
        checks.add_row(f"mass_{name}", mass, 1.0)
        gap = abs(mass - 1.0)
        record.check(f"{name}: p_t has mass one", gap <= 1e-6, gap, "<= 1e-6")

    n = config.n if config.n is not None else 200
    diagonal = _spaced(n)
    state = FreeConvState(AtomicMeasure.empirical(diagonal), t)
    table = fc_table(state)
    record.add_artifact(table.to_csv(run_dir.path / "free_convolution.csv"))
    base = np.diag(diagonal).astype(np.complex128)

    def trial(ctx: TrialContext) -> float:
        eigenvalues = hermitian_eig(perturb(base, t, ctx.rng)).eigenvalues
        return float(stats.kstest(eigenvalues, lambda x: fc_cdf(state, x, table=table)).statistic)

    distances = successful(runner.run(trial, config.trials or 10))
    ks = record.table("spectrum_ks", ["trial", "ks"])
    for index, value in enumerate(distances):
        ks.add_row(index, value)
    if distances:
        mean = float(np.mean(distances))
        record.check(
            "sampled spectrum matches p_t", mean <= config.tolerance("ks", 0.05), mean, "<= 0.05"
        )
    record.derived.update(t=t, n=n, table_mass=table.mass)


def cmd_benigni(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """sqrt(n) <q, u_k> of D + sqrt(t) W against the complex Gaussian of variance sigma^2."""

    n = config.n if config.n is not None else 500
    t = config.t if config.t is not None else n ** (-1.0 / 3.0)
    k = int(config.option("k", n // 2))
    diagonal = _spaced(n)
    q = np.full(n, 1.0 / math.sqrt(n))
    variance = sigma_sq(q, k, diagonal, t)
    record.derived.update(n=n, t=t, k=k, sigma_sq=variance)

    def trial(ctx: TrialContext) -> complex:
        return complex(eigenvector_projection_samples(diagonal, t, q, k, 1, ctx.rng)[0])

    samples = np.asarray(successful(runner.run(trial, config.trials or 500)), dtype=np.complex128)
    table = record.table("projections", ["trial", "re", "im"])
    for index, value in enumerate(samples):
        table.add_row(index, value.real, value.imag)
    if samples.size < 2:
        record.check("projection samples", False)
        return
    ratio = float(np.mean(np.abs(samples) ** 2) / variance)
    ks = float(stats.kstest(samples.real / math.sqrt(variance / 2.0), "norm").statistic)
    summary = record.table("benigni_summary", ["samples", "variance_ratio", "ks"])
    summary.add_row(int(samples.size), ratio, ks)
    low = config.tolerance("variance_ratio_low", 0.8)
    high = config.tolerance("variance_ratio_high", 1.25)
    record.check("variance ratio", low <= ratio <= high, ratio, f"[{low}, {high}]")
    record.check("real part is Gaussian", ks <= config.tolerance("ks", 0.08), ks, "<= 0.08")


def _flow_diagonal(config: ExperimentConfig, n: int, runner: TrialRunner) -> NDArray[np.float64]:
    source = config.option("diagonal", "torus")
    if source == "spaced":
        return _spaced(n)
    if source != "torus":
        raise ConfigError(f"unknown flow diagonal {source!r}; expected 'torus' or 'spaced'")
    side = math.isqrt(n)
    if side * side != n:
        raise ConfigError(f"a torus diagonal needs n to be a square, got {n}")
    spec = TorusSpec.random(side, runner.context(0, "diagonal").rng)
    return np.sort(all_eigenvalues(spec))


def cmd_flow(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Drift and quadratic variation of m_t(z) and G_t(x, x, z) along the Dyson flow."""

    n = config.n if config.n is not None else 100
    t_final = config.t if config.t is not None else 0.02
    eta = config.eta if config.eta is not None else DEFAULT_ETA
    z = complex(config.energy, eta)
    diagonal = _flow_diagonal(config, n, runner)
    start = FlowState.from_diagonal(diagonal)
    record.derived.update(n=n, t_final=t_final, z=[z.real, z.imag], steps=config.steps)

    def trial(ctx: TrialContext) -> FlowObservable:
        return simulate_path(start, z, (0,), t_final, config.steps, ctx.rng)

    paths = successful(runner.run(trial, config.paths))
    if len(paths) < 2:
        record.check("flow paths", False)
        return
    record.add_artifact(paths[0].to_csv(run_dir.path / "flow_path_0.csv"))
    drift = drift_residual(paths, include_drift=not config.negative_control)
    qv = [qv_check(path, 0) for path in paths[: int(config.option("qv_paths", 100))]]
    qv_ratio = float(np.mean([item.ratio for item in qv]))
    table = record.table("flow", ["paths", "include_drift", "drift_statistic", "qv_ratio"])
    table.add_row(len(paths), not config.negative_control, drift.statistic, qv_ratio)
    if config.negative_control:
        record.check(
            "drift omitted: residual detected", drift.statistic > 3.0, drift.statistic, "> 3"
        )
    else:
        record.check("drift residual", drift.statistic <= 3.0, drift.statistic, "<= 3")
        record.check("quadratic variation ratio", 0.7 <= qv_ratio <= 1.4, qv_ratio, "[0.7, 1.4]")
    worst = max(item.predicted / item.bound if item.bound > 0.0 else 0.0 for item in qv)
    record.check("predicted quadratic variation within crude bound", worst <= 1.0, worst, "<= 1")

    euler_dt = float(config.option("euler_dt", 0.2 * eta * eta))
    ratio = euler_order_ratio(
        start, z, euler_dt, int(config.option("euler_samples", 400)), runner.context(0, "euler").rng
    )
    record.table("euler", ["dt", "bias_ratio"]).add_row(euler_dt, ratio)
    record.check(
        "halving dt halves the drift bias",
        0.25 <= ratio <= 0.75,
        ratio,
        "[0.25, 0.75]",
        acceptance=False,
    )

    if not config.option("stopping", True):
        return
    stopping = record.table("stopping", ["t_final", "probability", "probability_over_sqrt_nt"])
    z_stop = complex(config.energy, 1.0 / n)
    scaled: list[float] = []
    for index, exponent in enumerate((3.0, 2.5)):
        horizon = float(n) ** -exponent
        try:
            probability = stopping_time_experiment(
                diagonal,
                horizon,
                z_stop,
                int(config.option("stopping_paths", 50)),
                runner.context(index, "stopping").rng,
                steps=config.steps,
            )
        except InvalidParameter as exc:
            record.add_failure("stopping", index, str(exc))
            continue
        scaled.append(probability / math.sqrt(n * horizon))
        stopping.add_row(horizon, probability, scaled[-1])
    if scaled:
        limit = config.tolerance("stopping_ratio", 10.0)
        record.check(
            "stopping probability / sqrt(n t) bounded",
            max(scaled) <= limit,
            max(scaled),
            f"<= {limit}",
            acceptance=False,
        )


# ----------------------------------------------------------------------
# Fourier variance
# ----------------------------------------------------------------------
def cmd_fourier_scan(
    config: ExperimentConfig, runner: TrialRunner, run_dir: RunDirectory, record: RunRecord
) -> None:
    """Var(l, s, t) of the wave coefficients.

    Checks the scaling in l and the off-curve bound, with a Monte-Carlo cross-check.
    """

    ells = [int(v) for v in config.option("ells", [16, 32, 64])]
    table = record.table(
        "fourier_scan", ["ell", "max_var_over_ell", "max_off_curve_var", "off_curve_bound"]
    )
    peaks: list[float] = []
    for ell in ells:
        variances = wave_fourier_variance_table(config.energy, ell)
        mask = near_curve_mask(config.energy, ell)
        off_curve = float(variances[~mask].max()) if (~mask).any() else 0.0
        peaks.append(float(variances.max()) / ell)
        table.add_row(ell, peaks[-1], off_curve, 16.0 * ell)
        if ell == max(ells):
            record.check(
                f"ell={ell}: Var <= 16 ell off the level curve",
                off_curve <= 16.0 * ell,
                off_curve,
                f"<= {16 * ell}",
            )
    if len(peaks) > 1:
        record.check(
            "max Var / ell non-increasing in ell",
            all(later <= earlier for earlier, later in zip(peaks, peaks[1:], strict=False)),
            peaks[-1],
            "non-increasing",
        )

    ell = int(config.option("mc_ell", 8))
    budget = int(config.option("budget", 100_000))
    points = runner.context(0, "frequencies").rng.integers(0, ell, size=(10, 2))

    def trial(ctx: TrialContext) -> tuple[int, int, float, float, float]:
        s, t = (int(v) for v in points[ctx.index])
        exact = wave_fourier_variance(config.energy, ell, s, t).value
        estimate = wave_fourier_variance(config.energy, ell, s, t, "expectation", budget, ctx.rng)
        return s, t, exact, estimate.value, estimate.stderr

    comparison = record.table("fourier_mc", ["s", "t", "quadratic_form", "expectation", "stderr"])
    worst = 0.0
    for s, t, exact, value, stderr in successful(runner.run(trial, len(points), label="mc")):
        comparison.add_row(s, t, exact, value, stderr)
        worst = max(worst, abs(exact - value) / stderr if stderr > 0.0 else 0.0)
    record.check("quadratic form agrees with expectation", worst <= 3.0, worst, "<= 3 stderr")


EXPERIMENTS: dict[str, Experiment] = {
    "rho": cmd_rho,
    "wave-sample": cmd_wave_sample,
    "phase-scan": cmd_phase_scan,
    "regularity": cmd_regularity,
    "close-pairs": cmd_close_pairs,
    "free-conv": cmd_free_conv,
    "benigni": cmd_benigni,
    "flow": cmd_flow,
    "concentration": cmd_concentration,
    "fourier-scan": cmd_fourier_scan,
    "render": cmd_render,
}


@dataclass(slots=True)
class RunResult:
    record: RunRecord
    directory: RunDirectory
    record_path: Path


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Validate ``config``, run its experiment and persist the record.

    Raises:
        ConfigError: if the configuration is invalid.
        ArtifactError: if the run directory cannot be written.
    """

    config.validate()
    experiment = EXPERIMENTS[config.experiment]
    run_dir = ensure_run_directory(config.output_dir, config.experiment, config.master_seed)
    runner = TrialRunner(config.experiment, config.master_seed, config.workers)
    record = RunRecord(experiment=config.experiment, config=config.as_dict())
    LOG.info("running %s (seed %d) into %s", config.experiment, config.master_seed, run_dir.path)
    started = time.perf_counter()
    experiment(config, runner, run_dir, record)
    record.wall_clock = time.perf_counter() - started
    record.seeds = runner.tracker.seeds()
    for failure in runner.tracker.failures():
        record.add_failure(failure.stream, failure.index, failure.error or "")
    record_path = record.write(run_dir.path)
    LOG.info(
        "%s finished in %.1fs: %s",
        config.experiment,
        record.wall_clock,
        "ok" if record.passed else "FAILED",
    )
    return RunResult(record=record, directory=run_dir, record_path=record_path)
