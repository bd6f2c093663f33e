"""Physical constants and frequency/wavelength conversions."""

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # vacuum, m/s (exact)

TWO_PI = 2.0 * np.pi


def omega_from_wavelength(wavelength):
    """Angular frequency (rad/s) of a vacuum wavelength (m)."""
    return TWO_PI * SPEED_OF_LIGHT / np.asarray(wavelength, dtype=float)


def wavelength_from_omega(omega):
    """Vacuum wavelength (m) of an angular frequency (rad/s)."""
    return TWO_PI * SPEED_OF_LIGHT / np.asarray(omega, dtype=float)
