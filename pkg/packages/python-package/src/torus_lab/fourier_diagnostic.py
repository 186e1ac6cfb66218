"""Local Fourier transform of window fields and the product-phase / wave-phase statistics.

u_hat(l, s, t) = (1/l) sum_{x,y=0}^{l-1} exp(-2 pi i (x s + y t) / l) u(o + (x, y)),
so that Parseval holds without constants.  A tensor-product eigenvector has a
coefficient of order l while a Gaussian wave has all coefficients of order
sqrt(l).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft

from .errors import InvalidParameter
from .lab.artifacts import write_csv
from .gaussian_wave import Window, offset_correlations, sample_wave, wave_covariance
from .spectral_density import AngleSampler

LOG = logging.getLogger(__name__)

# Dominant-coefficient threshold as a fraction of l, see calibrate_threshold.
DEFAULT_THRESHOLD_FACTOR = 0.01
CURVE_SAMPLES = 8192


@dataclass(slots=True)
class FourierTable:
    """Coefficients indexed [s, t], s, t in 0..l-1."""

    ell: int
    coefficients: NDArray[np.complex128]

    def to_csv(self, path: Path) -> Path:
        rows = (
            (s, t, float(value.real), float(value.imag), float(abs(value)))
            for (s, t), value in np.ndenumerate(self.coefficients)
        )
        return write_csv(path, ["s", "t", "re", "im", "abs"], rows)


def local_fourier(
    field: ArrayLike,
    ell: int,
    origin: tuple[int, int] = (0, 0),
    *,
    method: Literal["fft", "direct"] = "fft",
) -> FourierTable:
    """Normalized DFT of the l x l window of ``field`` whose corner is ``origin``.

    Raises:
        InvalidParameter: if the window leaves the field.
    """

    values = np.asarray(field, dtype=np.complex128)
    ox, oy = origin
    if ell < 1 or ox < 0 or oy < 0 or ox + ell > values.shape[0] or oy + ell > values.shape[1]:
        raise InvalidParameter(f"{ell}x{ell} window at {origin} leaves a {values.shape} field")
    window = values[ox : ox + ell, oy : oy + ell]
    if method == "fft":
        coefficients = fft.fft2(window) / ell
    elif method == "direct":
        k = np.arange(ell)
        kernel = np.exp(-2j * np.pi * np.outer(k, k) / ell)
        coefficients = kernel @ window @ kernel.T / ell
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return FourierTable(ell=ell, coefficients=coefficients)


def max_coefficient(table: FourierTable) -> tuple[int, int, float]:
    """Largest |u_hat(s, t)|; ties go to the lexicographically smallest (s, t)."""

    magnitudes = np.abs(table.coefficients)
    s, t = np.unravel_index(int(np.argmax(magnitudes)), magnitudes.shape)
    return int(s), int(t), float(magnitudes[s, t])


def centred_origin(shape: tuple[int, ...], ell: int) -> tuple[int, int]:
    return (shape[0] - ell) // 2, (shape[1] - ell) // 2


def dominant_fraction(
    fields: Iterable[ArrayLike],
    ell: int,
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR,
    origin: tuple[int, int] | None = None,
) -> float:
    """Fraction of fields whose largest coefficient reaches ``threshold_factor * l``.

    Without ``origin`` the window is centred in each field.
    """

    hits = 0
    total = 0
    for field in fields:
        values = np.asarray(field)
        corner = origin if origin is not None else centred_origin(values.shape, ell)
        _, _, magnitude = max_coefficient(local_fourier(values, ell, corner))
        hits += magnitude >= threshold_factor * ell
        total += 1
    if total == 0:
        raise InvalidParameter("dominant_fraction needs at least one field")
    return hits / total


def max_ratios(fields: Iterable[ArrayLike], ell: int) -> NDArray[np.float64]:
    """max_{s,t} |u_hat| / l for every field (centred window)."""

    ratios = []
    for field in fields:
        values = np.asarray(field)
        table = local_fourier(values, ell, centred_origin(values.shape, ell))
        _, _, magnitude = max_coefficient(table)
        ratios.append(magnitude / ell)
    return np.asarray(ratios)


def calibrate_threshold(
    energy: float,
    ell: int,
    rng: np.random.Generator,
    *,
    false_positive: float = 0.05,
    samples: int = 200,
) -> float:
    """Threshold factor whose Gaussian-wave exceedance rate is ``false_positive``.

    Returns the (1 - false_positive) quantile of max |Z_hat| / l over wave samples.
    """

    if not 0.0 < false_positive < 1.0:
        raise InvalidParameter(f"false_positive must lie in (0, 1), got {false_positive}")
    window = Window(half_width=ell // 2)
    fields = sample_wave(wave_covariance(energy, window), samples, rng)
    ratios = max_ratios(fields, ell)
    factor = float(np.quantile(ratios, 1.0 - false_positive))
    LOG.info("calibrated threshold factor %.4f at E=%g, l=%d", factor, energy, ell)
    return factor


# ----------------------------------------------------------------------
# Variance of the Gaussian-wave coefficients
# ----------------------------------------------------------------------
@dataclass(slots=True)
class FourierVariance:
    value: float
    stderr: float = 0.0


def _weights(ell: int) -> NDArray[np.float64]:
    """C[s, a + l - 1] = cos(2 pi s a / l) (l - |a|) for a in (-l, l)."""

    a = np.arange(-(ell - 1), ell)
    s = np.arange(ell)
    return np.cos(2.0 * np.pi * np.outer(s, a) / ell) * (ell - np.abs(a))


def wave_fourier_variance_table(energy: float, ell: int) -> NDArray[np.float64]:
    """Var(l, s, t) for all (s, t): (1/l^2) sum_{a,b} R(a, b) (l - |a|)(l - |b|) e^{-i(...)}.

    R is even in each offset, so the phases reduce to cosines.
    """

    if ell < 1:
        raise InvalidParameter(f"ell must be positive, got {ell}")
    correlations = offset_correlations(energy, ell - 1)
    index = np.abs(np.arange(-(ell - 1), ell))
    full = correlations[np.ix_(index, index)]
    weights = _weights(ell)
    return weights @ full @ weights.T / (ell * ell)


def _fejer(phi: NDArray[np.float64], ell: int) -> NDArray[np.float64]:
    """|sum_{x=0}^{l-1} e^{i x phi}|^2."""

    half = 0.5 * phi
    numerator = np.sin(ell * half) ** 2
    denominator = np.sin(half) ** 2
    small = denominator < 1e-300
    return np.where(small, float(ell * ell), numerator / np.where(small, 1.0, denominator))


def wave_fourier_variance(
    energy: float,
    ell: int,
    s: int,
    t: int,
    method: Literal["quadratic_form", "expectation"] = "quadratic_form",
    budget: int = 100_000,
    rng: np.random.Generator | None = None,
) -> FourierVariance:
    """Var(l, s, t) of the Gaussian-wave coefficient.

    ``quadratic_form`` sums the covariance against the Fourier weights;
    ``expectation`` averages (1/l^2) |sum e^{i x s_A}|^2 |sum e^{i y t_B}|^2
    over ``budget`` angle pairs on the level curve.
    """

    if not (0 <= s < ell and 0 <= t < ell):
        raise InvalidParameter(f"(s, t) = ({s}, {t}) outside 0..{ell - 1}")
    if method == "quadratic_form":
        correlations = offset_correlations(energy, ell - 1)
        index = np.abs(np.arange(-(ell - 1), ell))
        weights = _weights(ell)
        value = weights[s] @ correlations[np.ix_(index, index)] @ weights[t] / (ell * ell)
        return FourierVariance(float(value))
    if method != "expectation":
        raise InvalidParameter(f"unknown method {method!r}")
    if rng is None:
        raise InvalidParameter("the expectation method needs an rng")
    pairs = AngleSampler(energy).sample(rng, budget)
    samples = (
        _fejer(pairs.alpha - 2.0 * np.pi * s / ell, ell)
        * _fejer(pairs.beta - 2.0 * np.pi * t / ell, ell)
        / (ell * ell)
    )
    return FourierVariance(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(budget)))


# ----------------------------------------------------------------------
# Geometry of the level curve 2cos(alpha) + 2cos(beta) = E
# ----------------------------------------------------------------------
def checkerboard(field: ArrayLike) -> NDArray[np.complex128]:
    """Multiply by (-1)^(x+y); maps eigenfunctions at E to eigenfunctions at -E."""

    values = np.asarray(field, dtype=np.complex128)
    x, y = np.indices(values.shape[:2])
    return values * np.where((x + y) % 2 == 0, 1.0, -1.0)


def _fold(k: int, ell: int) -> int:
    return k - ell if k > ell / 2 else k


def _wrap(angle: NDArray[np.float64]) -> NDArray[np.float64]:
    """Distance to 2 pi Z."""

    return np.abs((angle + np.pi) % (2.0 * np.pi) - np.pi)


def level_curve(energy: float, samples: int = CURVE_SAMPLES) -> NDArray[np.float64]:
    """Points (alpha, beta) of the level curve at |E| > 0, shape (m, 2)."""

    magnitude = abs(energy)
    if not 0.0 < magnitude < 4.0:
        raise InvalidParameter(f"energy must lie in (-4, 4) without 0, got {energy}")
    reach = math.acos((magnitude - 2.0) / 2.0)
    alpha = np.linspace(-reach, reach, samples)
    beta = np.arccos(np.clip(magnitude / 2.0 - np.cos(alpha), -1.0, 1.0))
    points = np.concatenate(
        [np.stack([alpha, beta], axis=1), np.stack([alpha, -beta], axis=1)], axis=0
    )
    # The curve is symmetric under alpha <-> beta; the swapped copy resolves its steep ends.
    points = np.concatenate([points, points[:, ::-1]], axis=0)
    if energy < 0.0:
        points = points + np.pi
    return points


def level_curve_distance(
    energy: float, alpha: ArrayLike, beta: ArrayLike, *, samples: int = CURVE_SAMPLES
) -> NDArray[np.float64]:
    """inf over the curve of the max-norm distance modulo 2 pi."""

    curve = level_curve(energy, samples)
    a = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    out = np.empty(np.broadcast(a, b).shape)
    flat_a, flat_b = np.broadcast_arrays(a, b)
    for index, (x, y) in enumerate(zip(flat_a.ravel(), flat_b.ravel(), strict=True)):
        gap = np.maximum(_wrap(curve[:, 0] - x), _wrap(curve[:, 1] - y))
        out.flat[index] = gap.min()
    return out


def scaled_frequency(ell: int, s: int, t: int) -> tuple[float, float]:
    """(2 pi s'/l, 2 pi t'/l) after folding s, t into |s'|, |t'| <= l/2."""

    return 2.0 * math.pi * _fold(s, ell) / ell, 2.0 * math.pi * _fold(t, ell) / ell


def near_curve_mask(energy: float, ell: int, radius: float | None = None) -> NDArray[np.bool_]:
    """mask[s, t]: the scaled frequency lies within ``radius`` (default l^-1/2) of the curve.

    For E < 0 the frequencies are shifted by (pi, pi) and tested against the
    curve at |E|.
    """

    reach = ell**-0.5 if radius is None else radius
    curve = level_curve(abs(energy))
    folded = np.array([_fold(k, ell) for k in range(ell)])
    angles = 2.0 * np.pi * folded / ell
    if energy < 0.0:
        angles = angles + np.pi
    # max-norm distance is max(|da|, |db|); minimize over the curve row by row.
    column_gap = _wrap(angles[:, None] - curve[None, :, 1])
    mask = np.empty((ell, ell), dtype=bool)
    for s in range(ell):
        row_gap = _wrap(angles[s] - curve[:, 0])
        distance = np.maximum(row_gap[None, :], column_gap).min(axis=1)
        mask[s] = distance <= reach
    return mask


def near_level_curve(energy: float, ell: int, s: int, t: int, radius: float | None = None) -> bool:
    return bool(near_curve_mask(energy, ell, radius)[s, t])


def geometric_filter_delta(energy: float, ell: int) -> float:
    """max of min(|alpha'|, |beta'|) over scaled frequencies near the curve (E > 0).

    Every near frequency then has a coordinate of modulus at most this value;
    it stays below arccos((E - 2)/2) for large l.
    """

    if energy <= 0.0:
        raise InvalidParameter("the coordinate filter is stated for E > 0")
    mask = near_curve_mask(energy, ell)
    if not mask.any():
        return 0.0
    folded = np.abs(np.array([_fold(k, ell) for k in range(ell)])) * 2.0 * np.pi / ell
    smaller = np.minimum(folded[:, None], folded[None, :])
    return float(smaller[mask].max())
