"""Peak statistics, entanglement measures, and time-domain analysis.

Covers transmission-peak detection with model-free FWHM measurement,
disorder-ensemble width histograms, Schmidt decomposition of two-photon
amplitudes, Hong-Ou-Mandel visibility, temporal wave-packet durations, and
peak-centre tracking across emission angles.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .constants import wavelength_from_omega
from .spdc import TwoPhotonAmplitude, trapezoid_weights
from .structure import StructureParams, derive_seed, generate_structure
from .tmm import (
    ResolutionPolicy,
    TransmissionSpectrum,
    transmission_spectrum,
)

#: Default transmittance floor for counting a local maximum as a peak.
DEFAULT_MIN_PEAK_HEIGHT = 0.1

#: Schmidt number below which a state is reported as nearly separable.
SEPARABILITY_K_THRESHOLD = 1.5

#: Log-spaced width bins, 6 per decade over 1e-4..10 nm.
DEFAULT_BIN_EDGES_NM = np.logspace(-4.0, 1.0, 31)


@dataclass(frozen=True)
class Peak:
    """One transmission peak: centre, FWHM in wavelength, and height."""

    center_omega: float
    center_wavelength: float
    fwhm_wavelength: float
    height: float

    def __post_init__(self):
        if not self.fwhm_wavelength > 0:
            raise ValueError("peak FWHM must be positive")
        if not 0.0 < self.height <= 1.0 + 1e-9:
            raise ValueError(f"peak height must be in (0, 1], got {self.height}")

    @property
    def fwhm_omega(self) -> float:
        """FWHM converted to angular frequency (rad/s)."""
        from .constants import SPEED_OF_LIGHT, TWO_PI

        return TWO_PI * SPEED_OF_LIGHT * self.fwhm_wavelength / self.center_wavelength**2


def _local_max_indices(y: np.ndarray) -> np.ndarray:
    interior = (y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])
    return np.nonzero(interior)[0] + 1


def _parabolic_vertex(x: np.ndarray, y: np.ndarray, j: int) -> float:
    """Vertex abscissa of the parabola through samples j-1, j, j+1."""
    x0, x1, x2 = x[j - 1] - x[j], 0.0, x[j + 1] - x[j]
    y0, y1, y2 = y[j - 1], y[j], y[j + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x[j])
    vertex = -b / (2.0 * a)
    span = max(x[j] - x[j - 1], x[j + 1] - x[j])
    if abs(vertex) > span:
        return float(x[j])
    return float(x[j] + vertex)


def half_crossings(x: np.ndarray, y: np.ndarray, j: int, level: float):
    """x positions where y falls to ``level`` on each side of index j.

    Linear interpolation between the bracketing samples; returns None when a
    crossing runs off the array.
    """
    left = None
    for i in range(j, 0, -1):
        if y[i - 1] <= level:
            frac = (y[i] - level) / (y[i] - y[i - 1])
            left = x[i] + frac * (x[i - 1] - x[i])
            break
    right = None
    for i in range(j, len(y) - 1):
        if y[i + 1] <= level:
            frac = (y[i] - level) / (y[i] - y[i + 1])
            right = x[i] + frac * (x[i + 1] - x[i])
            break
    if left is None or right is None:
        return None
    return float(left), float(right)


def find_peaks(
    spec: TransmissionSpectrum, min_height: float = DEFAULT_MIN_PEAK_HEIGHT
) -> list[Peak]:
    """Local transmittance maxima with T >= min_height, FWHM by linear
    interpolation of the half-maximum crossings on the refined grid.

    Peaks whose half-maximum crossings leave the window are discarded.
    Requires an adaptively refined spectrum.
    """
    if not spec.refined:
        raise ValueError(
            "spectrum lacks refinement metadata; produce it with transmission_spectrum"
        )
    omega, t = spec.omega, spec.transmittance
    peaks = []
    for j in _local_max_indices(t):
        if t[j] < min_height:
            continue
        crossings = half_crossings(omega, t, j, 0.5 * t[j])
        if crossings is None:
            continue
        lo, hi = crossings
        center = _parabolic_vertex(omega, t, j)
        fwhm_wavelength = float(
            wavelength_from_omega(lo) - wavelength_from_omega(hi)
        )
        peaks.append(
            Peak(
                center_omega=center,
                center_wavelength=float(wavelength_from_omega(center)),
                fwhm_wavelength=fwhm_wavelength,
                height=float(t[j]),
            )
        )
    peaks.sort(key=lambda p: p.center_omega)
    return peaks


def write_peaks_csv(peaks: Sequence[Peak], path) -> None:
    with open(path, "w") as fh:
        fh.write("center_omega_rad_s,center_wavelength_nm,fwhm_nm,height\n")
        for p in peaks:
            fh.write(
                f"{float(p.center_omega)!r},{float(p.center_wavelength * 1e9)!r},"
                f"{float(p.fwhm_wavelength * 1e9)!r},{float(p.height)!r}\n"
            )


# -- disorder-ensemble width statistics --------------------------------------


@dataclass(frozen=True)
class EnsembleStats:
    """Histogram of transmission-peak FWHMs over disorder realizations."""

    bin_edges_nm: np.ndarray
    counts: np.ndarray
    n_realizations: int
    theta_deg: float
    omega_window: tuple[float, float]
    params: StructureParams
    min_height: float
    n_peaks_total: int

    @property
    def probability(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / total

    def occupied_decades(self) -> float:
        """log10 span of the occupied bin range (0 when fewer than two bins)."""
        occupied = np.nonzero(self.counts)[0]
        if len(occupied) == 0:
            return 0.0
        lo = self.bin_edges_nm[occupied[0]]
        hi = self.bin_edges_nm[occupied[-1] + 1]
        return float(np.log10(hi / lo))


def _realization_widths_nm(args) -> list[float]:
    params, theta_deg, window, min_height, policy, index = args
    seed = derive_seed(params.seed, index)
    st = generate_structure(replace(params, seed=seed))
    spec = transmission_spectrum(st, theta_deg, window, policy)
    return [p.fwhm_wavelength * 1e9 for p in find_peaks(spec, min_height)]


def peak_width_histogram(
    params: StructureParams,
    theta_deg: float,
    omega_window: tuple[float, float],
    n_realizations: int,
    min_height: float = DEFAULT_MIN_PEAK_HEIGHT,
    policy: ResolutionPolicy | None = None,
    workers: int = 1,
    bin_edges_nm: np.ndarray | None = None,
) -> EnsembleStats:
    """generate -> spectrum -> find_peaks per seed; aggregate FWHMs.

    Per-realization seeds are a pure function of (params.seed, index) and
    results are reduced in index order, so the histogram is identical for any
    worker count.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    edges = DEFAULT_BIN_EDGES_NM if bin_edges_nm is None else np.asarray(bin_edges_nm)
    tasks = [
        (params, theta_deg, omega_window, min_height, policy, index)
        for index in range(n_realizations)
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            per_realization = pool.map(_realization_widths_nm, tasks)
    else:
        per_realization = [_realization_widths_nm(t) for t in tasks]
    widths = [w for widths_r in per_realization for w in widths_r]
    counts, _ = np.histogram(widths, bins=edges)
    return EnsembleStats(
        bin_edges_nm=edges,
        counts=counts,
        n_realizations=n_realizations,
        theta_deg=float(theta_deg),
        omega_window=tuple(omega_window),
        params=params,
        min_height=min_height,
        n_peaks_total=len(widths),
    )


def write_histogram_csv(stats: EnsembleStats, path) -> None:
    prob = stats.probability
    with open(path, "w") as fh:
        fh.write("bin_lo_nm,bin_hi_nm,count,probability\n")
        for i in range(len(stats.counts)):
            fh.write(
                f"{float(stats.bin_edges_nm[i])!r},{float(stats.bin_edges_nm[i + 1])!r},"
                f"{int(stats.counts[i])},{float(prob[i])!r}\n"
            )


# -- Schmidt decomposition ----------------------------------------------------


@dataclass(frozen=True)
class SchmidtResult:
    """Singular-value spectrum of the quadrature-weighted amplitude."""

    singular_values: np.ndarray  # non-increasing
    mode_weights: np.ndarray  # normalised squares, sum 1
    schmidt_number: float  # 1 / sum weights^2
    entropy: float  # -sum w log2 w


def schmidt_decomposition(a: TwoPhotonAmplitude) -> SchmidtResult:
    """SVD of phi weighted by sqrt(trapezoid cell measures).

    The weighting makes the discrete singular values quadrature-consistent
    estimates of the continuous Schmidt coefficients.
    """
    w_s = trapezoid_weights(a.omega_s)
    w_i = trapezoid_weights(a.omega_i)
    weighted = a.values * np.sqrt(np.outer(w_s, w_i))
    if not np.any(weighted):
        raise ValueError("cannot decompose a null amplitude")
    singular = np.linalg.svd(weighted, compute_uv=False)
    weights = singular**2 / np.sum(singular**2)
    schmidt_number = 1.0 / float(np.sum(weights**2))
    positive = weights[weights > 0]
    entropy = float(-np.sum(positive * np.log2(positive)))
    return SchmidtResult(
        singular_values=singular,
        mode_weights=weights,
        schmidt_number=schmidt_number,
        entropy=entropy,
    )


def write_schmidt_json(result: SchmidtResult, path) -> None:
    payload = {
        "singular_values": [float(x) for x in result.singular_values],
        "K": result.schmidt_number,
        "entropy": result.entropy,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- two-photon interference and time domain ----------------------------------


def hom_visibility(a: TwoPhotonAmplitude) -> float:
    """Hong-Ou-Mandel visibility of the two-photon amplitude.

    V = Re[inner(phi, swapped phi)] / norm^2; equals 1 for exchange-symmetric
    amplitudes and -1 for antisymmetric ones.  Requires identical grids.
    """
    if len(a.omega_s) != len(a.omega_i) or not np.array_equal(a.omega_s, a.omega_i):
        raise ValueError("HOM visibility needs identical signal and idler grids")
    w = trapezoid_weights(a.omega_s)
    cell = np.outer(w, w)
    denominator = float(np.sum(cell * np.abs(a.values) ** 2))
    if denominator == 0.0:
        raise ValueError("null amplitude")
    numerator = float(np.real(np.sum(cell * a.values * np.conj(a.values.T))))
    return numerator / denominator


def _check_uniform(x: np.ndarray, name: str) -> float:
    steps = np.diff(x)
    if steps.max() - steps.min() > 1e-9 * x[-1]:
        raise ValueError(f"{name} must be uniform for the Fourier transform")
    return float(steps.mean())


#: Edge-to-max amplitude ratio above which the grid is considered truncated.
EDGE_AMPLITUDE_RATIO = 1e-4


def temporal_marginal(a: TwoPhotonAmplitude, axis: int, pad_factor: int = 16):
    """Marginal temporal intensity along one photon's axis.

    The amplitude is zero-padded by ``pad_factor`` and Fourier transformed
    along ``axis``; the other frequency axis is integrated out of the squared
    modulus.  Returns (times, intensity) with intensity scaled so that
    sum(intensity) * dt equals the corresponding frequency-domain norm.
    """
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (signal) or 1 (idler)")
    peak = float(np.max(np.abs(a.values)))
    if peak == 0.0:
        raise ValueError("null amplitude")
    edge = max(
        float(np.max(np.abs(a.values[0, :]))),
        float(np.max(np.abs(a.values[-1, :]))),
        float(np.max(np.abs(a.values[:, 0]))),
        float(np.max(np.abs(a.values[:, -1]))),
    )
    if edge >= EDGE_AMPLITUDE_RATIO * peak:
        raise ValueError(
            f"amplitude truncated at grid edge (edge/max = {edge / peak:.2e}); "
            "widen the frequency grid"
        )
    own = a.omega_s if axis == 0 else a.omega_i
    other = a.omega_i if axis == 0 else a.omega_s
    d_omega = _check_uniform(own, "transform grid")
    _check_uniform(other, "integration grid")
    n_fft = pad_factor * len(own)
    values = a.values if axis == 0 else a.values.T
    spectrum = np.fft.fft(values, n=n_fft, axis=0)
    dt = 2.0 * np.pi / (n_fft * d_omega)
    w_other = trapezoid_weights(other)
    intensity = (np.abs(spectrum) ** 2 * (d_omega / (2.0 * np.pi)) ** 2) @ w_other
    intensity = np.fft.fftshift(intensity)
    times = (np.arange(n_fft) - n_fft // 2) * dt
    return times, intensity


def _fwhm_of_curve(x: np.ndarray, y: np.ndarray) -> float:
    j = int(np.argmax(y))
    crossings = half_crossings(x, y, j, 0.5 * y[j])
    if crossings is None:
        raise ValueError("half-maximum crossing leaves the sampled range")
    lo, hi = crossings
    return hi - lo


def temporal_wavepacket(a: TwoPhotonAmplitude, pad_factor: int = 16):
    """(signal, idler) wave-packet durations: FWHM of the marginal temporal
    intensity obtained by Fourier transforming phi along each axis."""
    durations = []
    for axis in (0, 1):
        times, intensity = temporal_marginal(a, axis, pad_factor)
        durations.append(_fwhm_of_curve(times, intensity))
    return tuple(durations)


def marginal_spectrum_fwhm(a: TwoPhotonAmplitude, axis: int = 0) -> float:
    """FWHM (rad/s) of the marginal spectral intensity along one axis,
    measured at the outermost half-maximum crossings."""
    own = a.omega_s if axis == 0 else a.omega_i
    other = a.omega_i if axis == 0 else a.omega_s
    w_other = trapezoid_weights(other)
    profile = (np.abs(a.values) ** 2 @ w_other) if axis == 0 else (
        w_other @ np.abs(a.values) ** 2
    )
    half = 0.5 * float(profile.max())
    above = np.nonzero(profile > half)[0]
    if len(above) == 0:
        raise ValueError("empty marginal")
    lo_i, hi_i = above[0], above[-1]
    if lo_i == 0 or hi_i == len(profile) - 1:
        raise ValueError("marginal half-maximum crossing leaves the grid")
    frac_lo = (profile[lo_i] - half) / (profile[lo_i] - profile[lo_i - 1])
    lo = own[lo_i] + frac_lo * (own[lo_i - 1] - own[lo_i])
    frac_hi = (profile[hi_i] - half) / (profile[hi_i] - profile[hi_i + 1])
    hi = own[hi_i] + frac_hi * (own[hi_i + 1] - own[hi_i])
    return float(hi - lo)


# -- peak-versus-angle dispersion ---------------------------------------------


@dataclass(frozen=True)
class DispersionTrack:
    """Tracked peak centre per emission angle, with a monotonicity verdict."""

    theta_deg: np.ndarray
    center_omega: np.ndarray
    monotone_nondecreasing: bool

    @property
    def center_wavelength(self) -> np.ndarray:
        return wavelength_from_omega(self.center_omega)


def track_peak(
    s,
    seed_peak: Peak,
    theta_list: Sequence[float],
    window_rel: float = 0.004,
    policy: ResolutionPolicy | None = None,
    min_height: float = 0.05,
) -> list[Peak]:
    """Follow one transmission peak across emission angles.

    At each angle a narrow window around the previous centre is re-solved and
    the nearest peak continues the track; losing the peak between two angles
    is an error that names the gap.
    """
    pol = policy or ResolutionPolicy(base_points=400)
    tracked: list[Peak] = []
    prev_center = seed_peak.center_omega
    prev_theta = None
    for theta in theta_list:
        window = (prev_center * (1 - window_rel), prev_center * (1 + window_rel))
        spec = transmission_spectrum(s, theta, window, pol)
        peaks = find_peaks(spec, min_height)
        if not peaks:
            origin = "the seed peak" if prev_theta is None else f"theta={prev_theta:g} deg"
            raise ValueError(
                f"peak lost between {origin} and theta={theta:g} deg "
                f"(no peak above T={min_height} in the tracking window)"
            )
        nearest = min(peaks, key=lambda p: abs(p.center_omega - prev_center))
        tracked.append(nearest)
        prev_center = nearest.center_omega
        prev_theta = theta
    return tracked


def peak_angle_dispersion(
    s,
    seed_peak: Peak,
    theta_list: Sequence[float],
    window_rel: float = 0.004,
    policy: ResolutionPolicy | None = None,
    min_height: float = 0.05,
) -> DispersionTrack:
    """Tracked peak centres per angle plus a monotonicity verdict."""
    tracked = track_peak(s, seed_peak, theta_list, window_rel, policy, min_height)
    centers = np.array([p.center_omega for p in tracked])
    return DispersionTrack(
        theta_deg=np.asarray(theta_list, dtype=float),
        center_omega=centers,
        monotone_nondecreasing=bool(np.all(np.diff(centers) >= 0.0)),
    )


def write_dispersion_csv(track: DispersionTrack, path) -> None:
    with open(path, "w") as fh:
        fh.write("theta_deg,center_wavelength_nm\n")
        for theta, lam in zip(track.theta_deg, track.center_wavelength):
            fh.write(f"{float(theta)!r},{float(lam * 1e9)!r}\n")
