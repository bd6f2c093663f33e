"""Two-photon joint spectral amplitudes from first-order perturbation theory.

The amplitude on a frequency grid is built from three linear solves per grid
line: the pump mode (normally incident plane wave from the front) and the
signal/idler detection modes (time-reversed transmission-side scattering
states, i.e. conjugated rear-incidence solutions).  Each nonlinear layer
contributes a closed-form eight-term overlap integral of the three fields;
phase mismatch is handled exactly per layer, with the small-mismatch limit
taken analytically.

All pair rates are relative: the overall constant carries no absolute
calibration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

from .constants import omega_from_wavelength
from .structure import LayeredStructure, ReferenceStructure
from .tmm import solve_fields_batch


class ContainerError(RuntimeError):
    """Raised when an amplitude container file is missing pieces or corrupt."""


def trapezoid_weights(x) -> np.ndarray:
    """Quadrature weights w such that sum(w * f) is the trapezoid rule."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("quadrature grid needs at least two points")
    w = np.empty(len(x))
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    return w


@dataclass(frozen=True)
class PumpPulse:
    """Chirp-free Gaussian pump pulse.

    ``duration_fwhm`` is the FWHM of the temporal *intensity* profile; the
    spectral amplitude is real, positive, and peaks at 1 at the central
    frequency.
    """

    central_wavelength: float = 775e-9
    duration_fwhm: float = 250e-15

    def __post_init__(self):
        if self.central_wavelength <= 0:
            raise ValueError("central_wavelength must be positive")
        if self.duration_fwhm <= 0:
            raise ValueError("duration_fwhm must be positive")

    @property
    def omega0(self) -> float:
        """Central angular frequency (rad/s)."""
        return float(omega_from_wavelength(self.central_wavelength))

    @property
    def sigma_time(self) -> float:
        """Standard deviation of the Gaussian field envelope (s)."""
        return self.duration_fwhm / (2.0 * np.sqrt(np.log(2.0)))

    def spectral_amplitude(self, omega):
        """Gaussian spectral amplitude, peak value 1 at omega0."""
        detuning = np.asarray(omega, dtype=float) - self.omega0
        return np.exp(-0.5 * (self.sigma_time * detuning) ** 2)


@dataclass(frozen=True)
class EmissionGeometry:
    """Signal/idler radial emission angles (degrees, vacuum side).

    Signal and idler leave at opposite sides of the emission cone.  With
    ``idler_coupling='fixed'`` the idler angle is held constant over the
    grid; ``'strict'`` enforces transverse-momentum matching pointwise,
    anchored at the signal-grid centre frequency.
    """

    theta_s_deg: float
    theta_i_deg: float
    idler_coupling: str = "fixed"

    def __post_init__(self):
        for name, value in (("theta_s_deg", self.theta_s_deg), ("theta_i_deg", self.theta_i_deg)):
            if not 0.0 <= value < 90.0:
                raise ValueError(f"{name} must be in [0, 90), got {value}")
        if self.idler_coupling not in ("fixed", "strict"):
            raise ValueError(
                f"idler_coupling must be 'fixed' or 'strict', got {self.idler_coupling!r}"
            )


@dataclass
class TwoPhotonAmplitude:
    """Complex joint spectral amplitude on ordered frequency grids."""

    omega_s: np.ndarray
    omega_i: np.ndarray
    values: np.ndarray  # complex, shape (len(omega_s), len(omega_i))
    geometry: EmissionGeometry
    pump: PumpPulse
    normalized: bool = False

    def __post_init__(self):
        self.omega_s = np.asarray(self.omega_s, dtype=float)
        self.omega_i = np.asarray(self.omega_i, dtype=float)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (len(self.omega_s), len(self.omega_i)):
            raise ValueError("amplitude shape does not match the grids")


@dataclass(frozen=True)
class ModeAmplitudes:
    """Per-layer (A_F, A_B, k_z) triples of one mode function."""

    a_fwd: np.ndarray
    a_bwd: np.ndarray
    kz: np.ndarray

    def layer_triple(self, layer: int):
        """((A_F, A_B), k_z) of one layer, as consumed by layer_overlap."""
        return (
            (complex(self.a_fwd[layer]), complex(self.a_bwd[layer])),
            complex(self.kz[layer]),
        )


def mode_function(
    s: LayeredStructure,
    omega: float,
    theta_deg: float,
    role: str,
    detection_side: str = "rear",
) -> ModeAmplitudes:
    """Per-layer field amplitudes of the pump or a detection mode.

    pump: raw amplitudes of a unit wave incident from the front.
    signal/idler: the time reverse of a unit wave incident from the
    detection side (default rear, i.e. transmission-side detection), which
    for real k_z means swapping forward/backward amplitudes and conjugating.
    """
    if role not in ("pump", "signal", "idler"):
        raise ValueError(f"role must be pump, signal, or idler, got {role!r}")
    if detection_side not in ("front", "rear"):
        raise ValueError(f"detection_side must be front or rear, got {detection_side!r}")
    if role == "pump":
        _, _, a_fwd, a_bwd, kz = solve_fields_batch(s, omega, theta_deg, side="front")
        return ModeAmplitudes(a_fwd=a_fwd[0], a_bwd=a_bwd[0], kz=kz[0])
    _, _, a_fwd, a_bwd, kz = solve_fields_batch(s, omega, theta_deg, side=detection_side)
    return ModeAmplitudes(
        a_fwd=np.conj(a_bwd[0]), a_bwd=np.conj(a_fwd[0]), kz=np.conj(kz[0])
    )


#: |delta| * length below which the phase-matched limit replaces the quotient.
_SMALL_MISMATCH = 1e-8


def _mismatch_integral(delta, z_lo, z_hi):
    length = z_hi - z_lo
    small = np.abs(delta) * abs(length) < _SMALL_MISMATCH
    safe = np.where(small, 1.0, delta)
    value = (np.exp(1j * safe * z_hi) - np.exp(1j * safe * z_lo)) / (1j * safe)
    return np.where(small, length + 0j, value)


def layer_overlap(pump, signal, idler, z_lo: float, z_hi: float) -> complex:
    """Closed-form three-field overlap over one layer.

    Each argument is ((A_F, A_B), k_z).  The integrand is the pump field
    times the conjugated signal and idler factors; expanding each field in
    its forward/backward parts yields eight plane-wave terms, each integrated
    exactly: the term with signs (a, b, c) carries the longitudinal mismatch
    s_a k_pz - s_b k_sz - s_c k_iz (s_F = +1, s_B = -1).
    """
    if not z_hi > z_lo:
        raise ValueError("z_hi must exceed z_lo")
    (p_f, p_b), k_p = pump
    (s_f, s_b), k_s = signal
    (i_f, i_b), k_i = idler
    total = 0j
    for sign_a, amp_p in ((1.0, p_f), (-1.0, p_b)):
        for sign_b, amp_s in ((1.0, s_f), (-1.0, s_b)):
            for sign_c, amp_i in ((1.0, i_f), (-1.0, i_b)):
                delta = sign_a * k_p - sign_b * k_s - sign_c * k_i
                total += (
                    amp_p
                    * np.conj(amp_s)
                    * np.conj(amp_i)
                    * _mismatch_integral(delta, z_lo, z_hi)
                )
    return complex(total)


def _nonlinear_subset(s: LayeredStructure):
    idx = [l for l, layer in enumerate(s.layers) if layer.material.nonlinear]
    chi = np.array([s.layers[l].material.chi2 for l in idx])
    d = s.thicknesses()[idx]
    return np.array(idx, dtype=int), chi, d


def _detection_modes_nl(s, omega, theta_deg, nl_idx, side, chunk=4096):
    """Conjugated detection-mode amplitudes restricted to nonlinear layers."""
    omega = np.asarray(omega, dtype=float)
    theta = np.asarray(theta_deg, dtype=float)
    n = len(omega)
    a_f = np.empty((n, len(nl_idx)), np.complex128)
    a_b = np.empty((n, len(nl_idx)), np.complex128)
    kz = np.empty((n, len(nl_idx)), np.complex128)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        th = theta[sl] if theta.ndim else theta
        _, _, fwd, bwd, k = solve_fields_batch(s, omega[sl], th, side=side)
        a_f[sl] = np.conj(bwd[:, nl_idx])
        a_b[sl] = np.conj(fwd[:, nl_idx])
        kz[sl] = np.conj(k[:, nl_idx])
    return a_f, a_b, kz


def _pump_modes_nl(s, omega, nl_idx, chunk=4096):
    omega = np.asarray(omega, dtype=float)
    n = len(omega)
    a_f = np.empty((n, len(nl_idx)), np.complex128)
    a_b = np.empty((n, len(nl_idx)), np.complex128)
    kz = np.empty((n, len(nl_idx)), np.complex128)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        _, _, fwd, bwd, k = solve_fields_batch(s, omega[sl], 0.0, side="front")
        a_f[sl] = fwd[:, nl_idx]
        a_b[sl] = bwd[:, nl_idx]
        kz[sl] = k[:, nl_idx]
    return a_f, a_b, kz


def _pump_frequency_plan(omega_s, omega_i):
    """Pump solve frequencies and the (i, j) -> pump index map.

    For uniform grids of equal step the sums omega_s[i] + omega_i[j] collapse
    onto anti-diagonals, so ns + ni - 1 pump solves cover the whole grid (the
    representative frequencies differ from the exact per-cell sums by at most
    a rounding ulp, far below any spectral feature).
    """
    ns, ni = len(omega_s), len(omega_i)
    hs = np.diff(omega_s)
    hi = np.diff(omega_i)
    tol = 1e-9 * max(omega_s[-1], omega_i[-1])
    uniform = (
        hs.max() - hs.min() < tol
        and hi.max() - hi.min() < tol
        and abs(hs.mean() - hi.mean()) < tol
    )
    if uniform:
        step = 0.5 * (hs.mean() + hi.mean())
        freqs = omega_s[0] + omega_i[0] + step * np.arange(ns + ni - 1)
        kmap = np.add.outer(np.arange(ns), np.arange(ni))
        return freqs, kmap
    wsum = np.add.outer(omega_s, omega_i)
    freqs, inverse = np.unique(wsum, return_inverse=True)
    return freqs, inverse.reshape(ns, ni)


def _validate_grid(omega, name):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or len(omega) < 2:
        raise ValueError(f"{name} must be a 1-D grid with at least two points")
    if np.any(np.diff(omega) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if np.any(omega <= 0):
        raise ValueError(f"{name} must be positive")
    return omega


def two_photon_amplitude(
    s: LayeredStructure,
    pump: PumpPulse,
    geometry: EmissionGeometry,
    omega_s,
    omega_i,
    detection_side: str = "rear",
    idler_chunk: int = 2048,
) -> TwoPhotonAmplitude:
    """Joint spectral amplitude phi(omega_s, omega_i), unnormalised.

    phi = E_p(omega_s + omega_i) * sum over nonlinear layers of
    chi2 * layer_overlap(pump mode at the sum frequency, signal mode,
    idler mode), with unit overall constant.  Normalise afterwards with
    :func:`normalize_amplitude` when the caption convention is needed.
    """
    omega_s = _validate_grid(omega_s, "omega_s")
    omega_i = _validate_grid(omega_i, "omega_i")
    nl_idx, chi, d_nl = _nonlinear_subset(s)
    if len(nl_idx) == 0:
        raise ValueError("structure has no nonlinear material")

    s_f, s_b, s_k = _detection_modes_nl(
        s, omega_s, geometry.theta_s_deg, nl_idx, detection_side
    )
    if geometry.idler_coupling == "strict":
        anchor = omega_s[(len(omega_s) - 1) // 2]
        sin_i = anchor * np.sin(np.radians(geometry.theta_s_deg)) / omega_i
        theta_i = np.degrees(np.arcsin(sin_i))
    else:
        theta_i = geometry.theta_i_deg
    i_f, i_b, i_k = _detection_modes_nl(s, omega_i, theta_i, nl_idx, detection_side)

    ns, ni = len(omega_s), len(omega_i)
    field = np.zeros((ns, ni), np.complex128)
    for start in range(0, ni, idler_chunk):
        sl = slice(start, min(start + idler_chunk, ni))
        freqs, kmap = _pump_frequency_plan(omega_s, omega_i[sl])
        p_f, p_b, p_k = _pump_modes_nl(s, freqs, nl_idx)
        field[:, sl] = _accumulate_layers(
            chi,
            d_nl,
            (p_f, p_b, p_k, kmap),
            (s_f, s_b, s_k),
            (i_f[sl], i_b[sl], i_k[sl]),
        )

    phi = pump.spectral_amplitude(np.add.outer(omega_s, omega_i)) * field
    return TwoPhotonAmplitude(
        omega_s=omega_s,
        omega_i=omega_i,
        values=phi,
        geometry=geometry,
        pump=pump,
        normalized=False,
    )


def _accumulate_layers_numpy(chi, d_nl, pump_pack, signal_pack, idler_pack):
    """Sum of chi2-weighted eight-term overlaps over the nonlinear layers."""
    p_f, p_b, p_k, kmap = pump_pack
    s_f, s_b, s_k = signal_pack
    i_f, i_b, i_k = idler_pack
    out = np.zeros((s_f.shape[0], i_f.shape[0]), np.complex128)
    for l in range(len(chi)):
        d = d_nl[l]
        kp = p_k[:, l][kmap]
        pf = p_f[:, l][kmap]
        pb = p_b[:, l][kmap]
        ep = np.exp(1j * p_k[:, l] * d)[kmap]
        ks = s_k[:, l][:, None]
        cs_f = np.conj(s_f[:, l])[:, None]
        cs_b = np.conj(s_b[:, l])[:, None]
        es = np.exp(-1j * s_k[:, l] * d)[:, None]
        ki = i_k[:, l][None, :]
        ci_f = np.conj(i_f[:, l])[None, :]
        ci_b = np.conj(i_b[:, l])[None, :]
        ei = np.exp(-1j * i_k[:, l] * d)[None, :]
        layer_sum = np.zeros_like(out)
        for sign_a, amp_p, exp_p in ((1.0, pf, ep), (-1.0, pb, 1.0 / ep)):
            for sign_b, amp_s, exp_s in ((1.0, cs_f, es), (-1.0, cs_b, 1.0 / es)):
                base = amp_p * amp_s
                phase = exp_p * exp_s
                mis = sign_a * kp - sign_b * ks
                for sign_c, amp_i, exp_i in ((1.0, ci_f, ei), (-1.0, ci_b, 1.0 / ei)):
                    delta = mis - sign_c * ki
                    small = np.abs(delta) * d < _SMALL_MISMATCH
                    safe = np.where(small, 1.0, delta)
                    integral = np.where(
                        small, d + 0j, (phase * exp_i - 1.0) / (1j * safe)
                    )
                    layer_sum += base * amp_i * integral
        out += chi[l] * layer_sum
    return out


if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _overlap_kernel(  # pragma: no cover - exercised via _accumulate_layers
        chi, d_nl, p_f, p_b, p_k, e_p, s_f, s_b, s_k, e_s, i_f, i_b, i_k, e_i, kmap, out
    ):
        ns, ni = out.shape
        n_layers = chi.shape[0]
        for i in prange(ns):
            for j in range(ni):
                k = kmap[i, j]
                acc = 0.0 + 0.0j
                for l in range(n_layers):
                    d = d_nl[l]
                    lacc = 0.0 + 0.0j
                    for ia in range(2):
                        if ia == 0:
                            amp_p = p_f[k, l]
                            exp_a = e_p[k, l]
                            k_a = p_k[k, l]
                        else:
                            amp_p = p_b[k, l]
                            exp_a = 1.0 / e_p[k, l]
                            k_a = -p_k[k, l]
                        for ib in range(2):
                            if ib == 0:
                                amp_s = s_f[i, l].conjugate()
                                exp_b = e_s[i, l]
                                k_b = s_k[i, l]
                            else:
                                amp_s = s_b[i, l].conjugate()
                                exp_b = 1.0 / e_s[i, l]
                                k_b = -s_k[i, l]
                            base = amp_p * amp_s
                            phase = exp_a * exp_b
                            mis = k_a - k_b
                            for ic in range(2):
                                if ic == 0:
                                    amp_i = i_f[j, l].conjugate()
                                    exp_c = e_i[j, l]
                                    k_c = i_k[j, l]
                                else:
                                    amp_i = i_b[j, l].conjugate()
                                    exp_c = 1.0 / e_i[j, l]
                                    k_c = -i_k[j, l]
                                delta = mis - k_c
                                if abs(delta) * d < _SMALL_MISMATCH:
                                    integral = d + 0.0j
                                else:
                                    integral = (phase * exp_c - 1.0) / (1j * delta)
                                lacc += base * amp_i * integral
                    acc += chi[l] * lacc
                out[i, j] = acc


def _accumulate_layers(chi, d_nl, pump_pack, signal_pack, idler_pack):
    if not _HAVE_NUMBA:
        return _accumulate_layers_numpy(chi, d_nl, pump_pack, signal_pack, idler_pack)
    p_f, p_b, p_k, kmap = pump_pack
    s_f, s_b, s_k = signal_pack
    i_f, i_b, i_k = idler_pack
    e_p = np.exp(1j * p_k * d_nl[None, :])
    e_s = np.exp(-1j * s_k * d_nl[None, :])
    e_i = np.exp(-1j * i_k * d_nl[None, :])
    out = np.empty((s_f.shape[0], i_f.shape[0]), np.complex128)
    _overlap_kernel(
        np.ascontiguousarray(chi),
        np.ascontiguousarray(d_nl),
        np.ascontiguousarray(p_f),
        np.ascontiguousarray(p_b),
        np.ascontiguousarray(p_k),
        e_p,
        np.ascontiguousarray(s_f),
        np.ascontiguousarray(s_b),
        np.ascontiguousarray(s_k),
        e_s,
        np.ascontiguousarray(i_f),
        np.ascontiguousarray(i_b),
        np.ascontiguousarray(i_k),
        e_i,
        np.ascontiguousarray(kmap.astype(np.int64)),
        out,
    )
    return out


def normalization_value(a: TwoPhotonAmplitude) -> float:
    """4 * double-integral of |phi|^2 divided by the squared pump centre
    frequency, evaluated by the trapezoid rule on the stored grids."""
    w_s = trapezoid_weights(a.omega_s)
    w_i = trapezoid_weights(a.omega_i)
    integral = float(w_s @ np.abs(a.values) ** 2 @ w_i)
    return 4.0 * integral / a.pump.omega0**2


def normalize_amplitude(a: TwoPhotonAmplitude) -> TwoPhotonAmplitude:
    """Rescale so that normalization_value(result) == 1."""
    current = normalization_value(a)
    if current == 0.0:
        raise ValueError("cannot normalize null state")
    return TwoPhotonAmplitude(
        omega_s=a.omega_s,
        omega_i=a.omega_i,
        values=a.values / np.sqrt(current),
        geometry=a.geometry,
        pump=a.pump,
        normalized=True,
    )


def reference_amplitude(
    ref: ReferenceStructure,
    pump: PumpPulse,
    omega_s,
    omega_i,
    geometry: EmissionGeometry | None = None,
) -> TwoPhotonAmplitude:
    """Amplitude of the homogeneous reference slab: unit internal fields and
    zero mismatch, so phi_ref = E_p(omega_s + omega_i) * L_nl."""
    omega_s = _validate_grid(omega_s, "omega_s")
    omega_i = _validate_grid(omega_i, "omega_i")
    wsum = np.add.outer(omega_s, omega_i)
    values = pump.spectral_amplitude(wsum).astype(np.complex128) * ref.nonlinear_length
    return TwoPhotonAmplitude(
        omega_s=omega_s,
        omega_i=omega_i,
        values=values,
        geometry=geometry or EmissionGeometry(0.0, 0.0),
        pump=pump,
        normalized=False,
    )


def relative_spectrum(a: TwoPhotonAmplitude, ref: ReferenceStructure) -> np.ndarray:
    """Signal spectrum divided by the reference-slab spectrum, per omega_s.

    Both spectra are idler-integrals of |phi|^2 over the stored grid with the
    same (unit) overall constant, so the ratio is the enhancement factor of
    the random structure over the phase-matched homogeneous slab.
    """
    if a.normalized:
        raise ValueError(
            "relative spectrum requires the unnormalized amplitude "
            "(the reference shares its overall constant)"
        )
    w_i = trapezoid_weights(a.omega_i)
    numerator = (np.abs(a.values) ** 2) @ w_i
    wsum = np.add.outer(a.omega_s, a.omega_i)
    ref_values = a.pump.spectral_amplitude(wsum) * ref.nonlinear_length
    denominator = (ref_values**2) @ w_i
    if np.any(denominator == 0.0):
        raise ValueError("reference spectrum vanishes on the grid; widen the pump or grids")
    return numerator / denominator


def relative_pair_rate(a: TwoPhotonAmplitude) -> float:
    """Double integral of |phi|^2 (relative units, pre-normalisation scale)."""
    w_s = trapezoid_weights(a.omega_s)
    w_i = trapezoid_weights(a.omega_i)
    return float(w_s @ np.abs(a.values) ** 2 @ w_i)


# -- container I/O -----------------------------------------------------------

_CONTAINER_FORMAT = "two-photon-amplitude"


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_amplitude(a: TwoPhotonAmplitude, path) -> None:
    """Write the binary grid container plus its JSON sidecar header.

    The matrix is stored row-major as little-endian float64 (re, im) pairs;
    grids and metadata go to ``<path>.json``.
    """
    path = Path(path)
    pairs = np.empty((*a.values.shape, 2), dtype="<f8")
    pairs[..., 0] = a.values.real
    pairs[..., 1] = a.values.imag
    path.write_bytes(np.ascontiguousarray(pairs).tobytes())
    header = {
        "format": _CONTAINER_FORMAT,
        "version": 1,
        "dtype": "<f8 (re, im) pairs",
        "order": "row-major",
        "shape": [len(a.omega_s), len(a.omega_i)],
        "omega_s_rad_s": [float(x) for x in a.omega_s],
        "omega_i_rad_s": [float(x) for x in a.omega_i],
        "geometry": {
            "theta_s_deg": a.geometry.theta_s_deg,
            "theta_i_deg": a.geometry.theta_i_deg,
            "idler_coupling": a.geometry.idler_coupling,
        },
        "pump": {
            "central_wavelength_nm": a.pump.central_wavelength * 1e9,
            "duration_fwhm_fs": a.pump.duration_fwhm * 1e15,
        },
        "normalized": a.normalized,
    }
    _sidecar_path(path).write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")


def load_amplitude(path) -> TwoPhotonAmplitude:
    path = Path(path)
    sidecar = _sidecar_path(path)
    if not path.exists():
        raise ContainerError(f"amplitude container {path} does not exist")
    if not sidecar.exists():
        raise ContainerError(f"sidecar header {sidecar} does not exist")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise ContainerError(f"sidecar header {sidecar}: invalid JSON: {exc}") from exc
    try:
        if header["format"] != _CONTAINER_FORMAT:
            raise ContainerError(f"{sidecar}: unexpected format {header['format']!r}")
        ns, ni = (int(x) for x in header["shape"])
        omega_s = np.array(header["omega_s_rad_s"], dtype=float)
        omega_i = np.array(header["omega_i_rad_s"], dtype=float)
        geometry = EmissionGeometry(
            theta_s_deg=float(header["geometry"]["theta_s_deg"]),
            theta_i_deg=float(header["geometry"]["theta_i_deg"]),
            idler_coupling=header["geometry"]["idler_coupling"],
        )
        pump = PumpPulse(
            central_wavelength=float(header["pump"]["central_wavelength_nm"]) * 1e-9,
            duration_fwhm=float(header["pump"]["duration_fwhm_fs"]) * 1e-15,
        )
        normalized = bool(header["normalized"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ContainerError(f"sidecar header {sidecar}: malformed ({exc})") from exc
    if len(omega_s) != ns or len(omega_i) != ni:
        raise ContainerError(f"sidecar header {sidecar}: grid lengths disagree with shape")
    raw = path.read_bytes()
    expected = ns * ni * 2 * 8
    if len(raw) != expected:
        raise ContainerError(
            f"amplitude container {path}: {len(raw)} bytes, expected {expected}"
        )
    pairs = np.frombuffer(raw, dtype="<f8").reshape(ns, ni, 2)
    values = pairs[..., 0] + 1j * pairs[..., 1]
    return TwoPhotonAmplitude(
        omega_s=omega_s,
        omega_i=omega_i,
        values=values,
        geometry=geometry,
        pump=pump,
        normalized=normalized,
    )


def export_amplitude_csv(a: TwoPhotonAmplitude, path) -> None:
    """Row-major CSV (omega_s, omega_i, |phi|^2, arg phi) for external plotting."""
    with open(path, "w") as fh:
        fh.write("omega_s_rad_s,omega_i_rad_s,abs2,phase_rad\n")
        abs2 = np.abs(a.values) ** 2
        phase = np.angle(a.values)
        for i, ws in enumerate(a.omega_s):
            for j, wi in enumerate(a.omega_i):
                fh.write(
                    f"{float(ws)!r},{float(wi)!r},"
                    f"{float(abs2[i, j])!r},{float(phase[i, j])!r}\n"
                )
