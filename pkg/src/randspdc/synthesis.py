"""Engineered two-photon states by coherent superposition over emission angles.

Two constructions: a continuous range of angles (yields frequency-coincident
states concentrated near the degenerate diagonal) and a set of discrete
pinholes at spectrally disjoint angles (yields one collective Schmidt mode
per pinhole).  Components are phase-compensated so they add constructively
at their peaks, summed with the requested weights, and normalised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import Peak, find_peaks, track_peak
from .spdc import (
    EmissionGeometry,
    PumpPulse,
    TwoPhotonAmplitude,
    normalize_amplitude,
    trapezoid_weights,
    two_photon_amplitude,
)
from .structure import LayeredStructure
from .tmm import ResolutionPolicy, transmission_spectrum

#: Maximum normalised cross-overlap for pinhole components to count as disjoint.
PINHOLE_OVERLAP_LIMIT = 0.01


@dataclass(frozen=True)
class SuperpositionResult:
    """A synthesised amplitude plus the recipe that produced it."""

    amplitude: TwoPhotonAmplitude
    mode: str
    thetas_deg: tuple[float, ...]
    weights: tuple[complex, ...]
    phases: tuple[complex, ...]

    def manifest(self) -> dict:
        return {
            "mode": self.mode,
            "thetas_deg": list(self.thetas_deg),
            "weights": [[w.real, w.imag] for w in self.weights],
            "phases": [[p.real, p.imag] for p in self.phases],
        }


def write_manifest(result: SuperpositionResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.manifest(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def compensation_phases(components: Sequence[TwoPhotonAmplitude]) -> np.ndarray:
    """Unit-modulus factor per component cancelling its phase at its own
    maximum-|phi| grid cell, so all components are real-positive at their
    peaks before summation."""
    factors = np.empty(len(components), dtype=np.complex128)
    for k, comp in enumerate(components):
        flat = np.abs(comp.values).ravel()
        idx = int(np.argmax(flat))
        if flat[idx] == 0.0:
            raise ValueError(f"component {k} is identically zero")
        factors[k] = np.exp(-1j * np.angle(comp.values.ravel()[idx]))
    return factors


def superpose_components(
    components: Sequence[TwoPhotonAmplitude],
    weights: Sequence[complex] | None = None,
    phases="peak-align",
) -> tuple[TwoPhotonAmplitude, np.ndarray, np.ndarray]:
    """Weighted, phase-compensated coherent sum on a common grid, normalised.

    ``phases`` is a policy name ('peak-align' or 'none') or an explicit array
    of unit-modulus factors.  Returns (amplitude, weights, phases).
    """
    if not components:
        raise ValueError("at least one component is required")
    first = components[0]
    for comp in components[1:]:
        if not (
            np.array_equal(comp.omega_s, first.omega_s)
            and np.array_equal(comp.omega_i, first.omega_i)
        ):
            raise ValueError("components must share a common frequency grid")
    if weights is None:
        w = np.ones(len(components), dtype=np.complex128)
    else:
        w = np.asarray(weights, dtype=np.complex128)
        if w.shape != (len(components),):
            raise ValueError("one weight per component is required")
    if isinstance(phases, str):
        if phases == "peak-align":
            f = compensation_phases(components)
        elif phases == "none":
            f = np.ones(len(components), dtype=np.complex128)
        else:
            raise ValueError(f"unknown phase policy {phases!r}")
    else:
        f = np.asarray(phases, dtype=np.complex128)
        if f.shape != (len(components),):
            raise ValueError("one phase factor per component is required")

    total = np.zeros_like(first.values)
    for wk, fk, comp in zip(w, f, components):
        total = total + wk * fk * comp.values
    summed = TwoPhotonAmplitude(
        omega_s=first.omega_s,
        omega_i=first.omega_i,
        values=total,
        geometry=first.geometry,
        pump=first.pump,
        normalized=False,
    )
    return normalize_amplitude(summed), w, f


def _seed_peak(
    s: LayeredStructure,
    theta_deg: float,
    search_window: tuple[float, float],
    policy: ResolutionPolicy | None,
    min_height: float,
) -> Peak:
    spec = transmission_spectrum(s, theta_deg, search_window, policy)
    peaks = find_peaks(spec, min_height)
    if not peaks:
        raise ValueError(
            f"no transmission peak above T={min_height} in the search window "
            f"at theta={theta_deg:g} deg"
        )
    return max(peaks, key=lambda p: p.height)


def plan_common_grid(
    peaks: Sequence[Peak],
    points_per_fwhm: float = 4.0,
    margin_fwhms: float = 8.0,
    max_points: int = 20000,
) -> np.ndarray:
    """Uniform grid covering all tracked peaks: union window with a margin of
    ``margin_fwhms`` times the widest peak, step the narrowest FWHM divided
    by ``points_per_fwhm`` (prevents aliasing of the finest component)."""
    centers = np.array([p.center_omega for p in peaks])
    widths = np.array([p.fwhm_omega for p in peaks])
    step = widths.min() / points_per_fwhm
    lo = centers.min() - margin_fwhms * widths.max()
    hi = centers.max() + margin_fwhms * widths.max()
    n = int(np.ceil((hi - lo) / step)) + 1
    if n > max_points:
        raise ValueError(
            f"common grid would need {n} points (cap {max_points}); narrow the "
            "angle range or accept a coarser resolution"
        )
    return np.linspace(lo, hi, n)


def _degenerate_components(
    s: LayeredStructure,
    pump: PumpPulse,
    thetas: np.ndarray,
    omega_s: np.ndarray,
    omega_i: np.ndarray,
    detection_side: str,
) -> list[TwoPhotonAmplitude]:
    components = []
    for theta in thetas:
        geometry = EmissionGeometry(float(theta), float(theta), "fixed")
        components.append(
            two_photon_amplitude(
                s, pump, geometry, omega_s, omega_i, detection_side=detection_side
            )
        )
    return components


def _resolve_grids(s, thetas, omega_s, omega_i, search_window, policy, min_height,
                   points_per_fwhm, margin_fwhms, max_grid_points):
    """Track the degenerate peak across ``thetas``; build grids when absent."""
    if omega_s is not None and omega_i is not None:
        omega_s = np.asarray(omega_s, dtype=float)
        omega_i = np.asarray(omega_i, dtype=float)
        window = search_window or (
            min(omega_s[0], omega_i[0]),
            max(omega_s[-1], omega_i[-1]),
        )
        seed = _seed_peak(s, float(thetas[0]), window, policy, min_height)
        tracked = track_peak(s, seed, thetas, policy=policy, min_height=min_height)
        return omega_s, omega_i, tracked
    if search_window is None:
        raise ValueError("search_window is required when grids are not given")
    seed = _seed_peak(s, float(thetas[0]), search_window, policy, min_height)
    tracked = track_peak(s, seed, thetas, policy=policy, min_height=min_height)
    grid = plan_common_grid(tracked, points_per_fwhm, margin_fwhms, max_grid_points)
    return grid, grid.copy(), tracked


def superpose_range(
    s: LayeredStructure,
    pump: PumpPulse,
    theta_lo_deg: float,
    theta_hi_deg: float,
    n_samples: int,
    omega_s=None,
    omega_i=None,
    *,
    search_window: tuple[float, float] | None = None,
    policy: ResolutionPolicy | None = None,
    min_height: float = 0.05,
    points_per_fwhm: float = 4.0,
    margin_fwhms: float = 8.0,
    max_grid_points: int = 20000,
    detection_side: str = "rear",
) -> SuperpositionResult:
    """Equal-weight superposition over equally spaced angles in a range.

    The degenerate peak (theta_s = theta_i = theta_k per component) is
    tracked across the range; losing it is an error.  Components are
    peak-aligned, summed, and normalised.
    """
    if theta_hi_deg < theta_lo_deg:
        raise ValueError("theta_hi_deg must be >= theta_lo_deg")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    thetas = (
        np.array([theta_lo_deg], dtype=float)
        if n_samples == 1
        else np.linspace(theta_lo_deg, theta_hi_deg, n_samples)
    )
    omega_s, omega_i, _ = _resolve_grids(
        s, thetas, omega_s, omega_i, search_window, policy, min_height,
        points_per_fwhm, margin_fwhms, max_grid_points,
    )
    components = _degenerate_components(s, pump, thetas, omega_s, omega_i, detection_side)
    amplitude, weights, phases = superpose_components(components)
    return SuperpositionResult(
        amplitude=amplitude,
        mode="range",
        thetas_deg=tuple(float(t) for t in thetas),
        weights=tuple(complex(w) for w in weights),
        phases=tuple(complex(p) for p in phases),
    )


def component_cross_overlaps(components: Sequence[TwoPhotonAmplitude]) -> np.ndarray:
    """Pairwise |<phi_k, phi_l>| / (|phi_k| |phi_l|) on the common grid."""
    first = components[0]
    w_s = trapezoid_weights(first.omega_s)
    w_i = trapezoid_weights(first.omega_i)
    cell = np.outer(w_s, w_i)
    n = len(components)
    overlaps = np.zeros((n, n))
    norms = [np.sqrt(np.sum(cell * np.abs(c.values) ** 2)) for c in components]
    for k in range(n):
        for l in range(k + 1, n):
            inner = np.sum(cell * components[k].values * np.conj(components[l].values))
            overlaps[k, l] = overlaps[l, k] = abs(inner) / (norms[k] * norms[l])
    return overlaps


def superpose_pinholes(
    s: LayeredStructure,
    pump: PumpPulse,
    theta_list_deg: Sequence[float],
    omega_s=None,
    omega_i=None,
    *,
    search_window: tuple[float, float] | None = None,
    policy: ResolutionPolicy | None = None,
    min_height: float = 0.05,
    points_per_fwhm: float = 4.0,
    margin_fwhms: float = 8.0,
    max_grid_points: int = 20000,
    detection_side: str = "rear",
    overlap_limit: float = PINHOLE_OVERLAP_LIMIT,
) -> SuperpositionResult:
    """Equal-weight superposition of M spectrally disjoint pinhole amplitudes.

    The M degenerate single-angle amplitudes must have pairwise normalised
    cross-overlap below ``overlap_limit``; each then contributes one
    collective Schmidt mode to the output state.
    """
    thetas = np.asarray(theta_list_deg, dtype=float)
    if thetas.ndim != 1 or len(thetas) < 1:
        raise ValueError("at least one pinhole angle is required")
    order = np.argsort(thetas)
    omega_s, omega_i, _ = _resolve_grids(
        s, thetas[order], omega_s, omega_i, search_window, policy, min_height,
        points_per_fwhm, margin_fwhms, max_grid_points,
    )
    components = _degenerate_components(s, pump, thetas, omega_s, omega_i, detection_side)
    if len(components) > 1:
        overlaps = component_cross_overlaps(components)
        worst = float(overlaps.max())
        if worst >= overlap_limit:
            k, l = np.unravel_index(int(np.argmax(overlaps)), overlaps.shape)
            raise ValueError(
                "pinholes not spectrally disjoint: components at "
                f"theta={thetas[k]:g} and theta={thetas[l]:g} deg overlap by "
                f"{worst:.3f} (limit {overlap_limit})"
            )
    amplitude, weights, phases = superpose_components(components)
    return SuperpositionResult(
        amplitude=amplitude,
        mode="pinholes",
        thetas_deg=tuple(float(t) for t in thetas),
        weights=tuple(complex(w) for w in weights),
        phases=tuple(complex(p) for p in phases),
    )
