"""Material registry: refractive-index dispersion and nonlinear coefficients.

The built-in set covers the two constituent media of the random stacks
(LiNbO3, extraordinary axis, for s-polarised fields along the optical axis,
and fused SiO2) plus vacuum.  The nonlinear coefficient ``chi2`` is a
relative weight with LiNbO3 normalised to 1; absolute pair-generation rates
are outside the scope of this package.

Two dispersion models are available: a Sellmeier fit (the physical default)
and a constant index (fast, analytically controlled; see :func:`frozen_at`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np


@dataclass(frozen=True)
class Sellmeier:
    """n^2(lam) = 1 + sum_i b_i lam^2 / (lam^2 - c_i) with lam in micrometres.

    Attributes:
        b: oscillator strengths.
        c: resonance terms in um^2.
    """

    b: tuple[float, ...]
    c: tuple[float, ...]

    def index(self, wavelength_m):
        lam2 = (np.asarray(wavelength_m, dtype=float) * 1e6) ** 2
        n2 = 1.0
        for bi, ci in zip(self.b, self.c):
            n2 = n2 + bi * lam2 / (lam2 - ci)
        return np.sqrt(n2)


@dataclass(frozen=True)
class ConstantIndex:
    """Dispersionless index, optionally recording where it was sampled."""

    n: float
    calibration_wavelength: float | None = None

    def index(self, wavelength_m):
        lam = np.asarray(wavelength_m, dtype=float)
        return np.full(lam.shape, self.n, dtype=float)


DispersionModel = Union[Sellmeier, ConstantIndex]


@dataclass(frozen=True)
class Material:
    """An optical medium with its dispersion model and nonlinear weight.

    Attributes:
        name: registry identifier.
        dispersion: index model, valid inside ``window``.
        chi2: relative second-order nonlinear coefficient (0 for linear media).
        window: supported vacuum-wavelength range (lo, hi) in metres.
    """

    name: str
    dispersion: DispersionModel
    chi2: float
    window: tuple[float, float]

    @property
    def nonlinear(self) -> bool:
        return self.chi2 > 0.0


def refractive_index(material: Material, wavelength):
    """Real refractive index of ``material`` at a vacuum wavelength (m).

    Accepts scalars or arrays.  Raises ValueError for queries outside the
    material's validity window, naming the window.
    """
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = material.window
    if np.any(lam < lo) or np.any(lam > hi):
        raise ValueError(
            f"wavelength outside the validity window of {material.name} "
            f"({lo * 1e9:g} nm to {hi * 1e9:g} nm)"
        )
    n = material.dispersion.index(lam)
    return float(n) if n.ndim == 0 else n


# LiNbO3 extraordinary index: Zelmon, Small, and Jundt,
# J. Opt. Soc. Am. B 14, 3319 (1997), congruent melt, room temperature.
LINBO3 = Material(
    name="LiNbO3",
    dispersion=Sellmeier(b=(2.9804, 0.5981, 8.9543), c=(0.02047, 0.0666, 416.08)),
    chi2=1.0,
    window=(4.0e-7, 5.0e-6),
)

# Fused silica: Malitson, J. Opt. Soc. Am. 55, 1205 (1965).
SIO2 = Material(
    name="SiO2",
    dispersion=Sellmeier(
        b=(0.6961663, 0.4079426, 0.8974794),
        c=(0.0684043**2, 0.1162414**2, 9.896161**2),
    ),
    chi2=0.0,
    window=(2.1e-7, 6.7e-6),
)

VACUUM = Material(
    name="vacuum",
    dispersion=ConstantIndex(1.0),
    chi2=0.0,
    window=(1e-9, 10e-6),
)

_REGISTRY: Mapping[str, Material] = MappingProxyType(
    {m.name: m for m in (VACUUM, LINBO3, SIO2)}
)


def builtin_materials() -> Mapping[str, Material]:
    """Immutable registry of the built-in materials {vacuum, LiNbO3, SiO2}."""
    return _REGISTRY


def frozen_at(material: Material, wavelength: float) -> Material:
    """Constant-index variant of ``material`` sampled at ``wavelength``.

    The constant agrees with the dispersive model at the calibration
    wavelength; the validity window is kept unchanged.
    """
    n = float(refractive_index(material, wavelength))
    return replace(
        material,
        dispersion=ConstantIndex(n, calibration_wavelength=float(wavelength)),
    )


def material_to_json(material: Material) -> dict:
    """JSON object form used inside structure files."""
    disp = material.dispersion
    if isinstance(disp, Sellmeier):
        model = {"model": "sellmeier", "b": list(disp.b), "c_um2": list(disp.c)}
    else:
        model = {"model": "constant", "n": disp.n}
        if disp.calibration_wavelength is not None:
            model["calibration_wavelength_nm"] = disp.calibration_wavelength * 1e9
    return {
        "name": material.name,
        "chi2": material.chi2,
        "window_nm": [material.window[0] * 1e9, material.window[1] * 1e9],
        "dispersion": model,
    }


def material_from_json(obj: dict) -> Material:
    """Inverse of :func:`material_to_json`; validates the name against the registry."""
    try:
        name = obj["name"]
        chi2 = float(obj["chi2"])
        window = (obj["window_nm"][0] * 1e-9, obj["window_nm"][1] * 1e-9)
        disp_obj = obj["dispersion"]
        model = disp_obj["model"]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed material record: missing field {exc}") from exc
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown material {name!r} (known: {known})")
    if model == "sellmeier":
        dispersion: DispersionModel = Sellmeier(
            b=tuple(float(x) for x in disp_obj["b"]),
            c=tuple(float(x) for x in disp_obj["c_um2"]),
        )
    elif model == "constant":
        cal = disp_obj.get("calibration_wavelength_nm")
        dispersion = ConstantIndex(
            n=float(disp_obj["n"]),
            calibration_wavelength=None if cal is None else cal * 1e-9,
        )
    else:
        raise ValueError(f"unknown dispersion model {model!r}")
    return Material(name=name, dispersion=dispersion, chi2=chi2, window=window)
