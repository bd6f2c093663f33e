"""Seeded generation and serialisation of random layered structures.

A structure is an ordered stack of elementary layers, each a coin flip
between the two constituent materials, with mean optical thickness a quarter
of the design wavelength and Gaussian jitter of the boundary positions.
Generation is a pure function of (params, seed): per-layer randomness comes
from counter-based streams so the result is independent of evaluation order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path

import numpy as np

from .materials import (
    LINBO3,
    SIO2,
    Material,
    material_from_json,
    material_to_json,
    refractive_index,
)

#: Supported readings of the boundary-jitter parameter.  The default treats
#: it as the standard deviation of the boundary shift measured in optical
#: path (the physical shift divides by the local index).  The ``*-variance``
#: readings treat the value v as a variance and use sigma = sqrt(v * lambda0).
JITTER_CONVENTIONS = (
    "optical-std",
    "physical-std",
    "optical-variance",
    "physical-variance",
)

_MATERIAL_STREAM = 0
_JITTER_STREAM = 1
_ENSEMBLE_STREAM = 2

_MAX_REDRAWS = 100


def _stream_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for draw stream ``stream`` at position ``index``.

    A pure function of (seed, stream, index); independent of the order in
    which other streams are consumed.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit per-realization seed, a pure function of (master_seed, index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_ENSEMBLE_STREAM, index))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class StructureParams:
    """Recipe parameters for random stack generation.

    ``mean_optical_thickness`` defaults to lambda0/4 and ``jitter_sigma_optical``
    to lambda0/40 when left as None.
    """

    n_layers: int = 300
    lambda0: float = 1550e-9
    mean_optical_thickness: float | None = None
    jitter_sigma_optical: float | None = None
    materials: tuple[Material, Material] = (LINBO3, SIO2)
    seed: int = 0
    jitter_convention: str = "optical-std"

    def __post_init__(self):
        if self.mean_optical_thickness is None:
            object.__setattr__(self, "mean_optical_thickness", self.lambda0 / 4.0)
        if self.jitter_sigma_optical is None:
            object.__setattr__(self, "jitter_sigma_optical", self.lambda0 / 40.0)
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if self.mean_optical_thickness <= 0:
            raise ValueError("mean_optical_thickness must be positive")
        if self.jitter_sigma_optical < 0:
            raise ValueError("jitter_sigma_optical must be >= 0")
        if self.jitter_convention not in JITTER_CONVENTIONS:
            raise ValueError(
                f"jitter_convention must be one of {JITTER_CONVENTIONS}, "
                f"got {self.jitter_convention!r}"
            )
        if len(self.materials) != 2:
            raise ValueError("exactly two constituent materials are required")
        if not (200 <= self.n_layers <= 400):
            warnings.warn(
                f"n_layers={self.n_layers} is outside the recommended 200-400 window",
                stacklevel=2,
            )


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # physical, m

    def __post_init__(self):
        if self.thickness <= 0:
            raise ValueError("layer thickness must be positive")


@dataclass(frozen=True)
class LayeredStructure:
    """An immutable stack of layers plus the recipe that produced it."""

    layers: tuple[Layer, ...]
    params: StructureParams
    seed: int

    @property
    def total_length(self) -> float:
        return float(sum(layer.thickness for layer in self.layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers], dtype=float)

    def material_of(self, index: int) -> Material:
        return self.layers[index].material


@dataclass(frozen=True)
class ReferenceStructure:
    """Homogeneous, perfectly phase-matched slab with the same amount of
    nonlinear material as the structure it was derived from."""

    nonlinear_length: float  # m
    phase_matched: bool = True


def _jitter_sigma_physical(params: StructureParams, n_local: float) -> float:
    value = params.jitter_sigma_optical
    convention = params.jitter_convention
    if convention.endswith("-variance"):
        value = float(np.sqrt(value * params.lambda0))
    if convention.startswith("optical"):
        return value / n_local
    return value


def generate_structure(params: StructureParams) -> LayeredStructure:
    """Draw a random layered structure per the recipe.

    Each layer's material is an independent fair coin flip between the two
    constituents; the pre-jitter physical thickness of a layer of index n is
    mean_optical_thickness / n(lambda0).  Internal boundary positions are
    then shifted by independent Gaussian draws whose standard deviation
    divides by the index of the layer on the incidence side of the boundary
    (optical-path convention).  Draws that would make a layer thickness
    non-positive are re-drawn, at most 100 times per boundary.
    """
    n_layers = params.n_layers
    mats = params.materials
    n_at_lambda0 = [refractive_index(m, params.lambda0) for m in mats]

    picks = np.empty(n_layers, dtype=int)
    for l in range(n_layers):
        picks[l] = _stream_rng(params.seed, _MATERIAL_STREAM, l).integers(0, 2)

    base = np.array([params.mean_optical_thickness / n_at_lambda0[p] for p in picks])

    d = base.copy()
    if params.jitter_sigma_optical > 0 and n_layers > 1:
        eps_prev = 0.0
        for b in range(1, n_layers):
            sigma = _jitter_sigma_physical(params, n_at_lambda0[picks[b - 1]])
            rng = _stream_rng(params.seed, _JITTER_STREAM, b)
            last = b == n_layers - 1
            for _ in range(_MAX_REDRAWS):
                eps = rng.normal(0.0, sigma)
                left = base[b - 1] + eps - eps_prev
                ok = left > 0 and (not last or base[b] - eps > 0)
                if ok:
                    break
            else:
                raise RuntimeError(
                    f"boundary {b}: could not draw a positive layer thickness "
                    f"in {_MAX_REDRAWS} attempts (jitter too large)"
                )
            d[b - 1] = left
            eps_prev = eps
        d[n_layers - 1] = base[n_layers - 1] - eps_prev

    layers = tuple(Layer(mats[p], float(t)) for p, t in zip(picks, d))
    return LayeredStructure(layers=layers, params=params, seed=params.seed)


def periodic_structure(params: StructureParams) -> LayeredStructure:
    """Jitter-free alternating stack (quarter-wave reference case).

    Layer l is materials[l % 2] with exact quarter-wave optical thickness at
    lambda0.  Useful as an analytic cross-check: the stack is a Bragg mirror
    with a deep gap at the design wavelength.
    """
    params = replace(params, jitter_sigma_optical=0.0)
    n_at_lambda0 = [refractive_index(m, params.lambda0) for m in params.materials]
    layers = tuple(
        Layer(
            params.materials[l % 2],
            params.mean_optical_thickness / n_at_lambda0[l % 2],
        )
        for l in range(params.n_layers)
    )
    return LayeredStructure(layers=layers, params=params, seed=params.seed)


def reference_structure(s: LayeredStructure) -> ReferenceStructure:
    """Homogeneous reference slab for relative-spectrum normalisation."""
    l_nl = sum(layer.thickness for layer in s.layers if layer.material.nonlinear)
    if l_nl == 0.0:
        raise ValueError("structure has no nonlinear material")
    return ReferenceStructure(nonlinear_length=float(l_nl))


def _thickness_to_nm_string(thickness_m: float) -> str:
    # Decimal(float) is exact and scaleb only shifts the exponent, so the
    # nm string reconstructs the double bit-exactly on load.
    return str(Decimal(thickness_m).scaleb(9))


def _thickness_from_nm_string(text) -> float:
    return float(Decimal(str(text)).scaleb(-9))


def structure_to_json(s: LayeredStructure) -> dict:
    p = s.params
    return {
        "format": "layered-structure",
        "version": 1,
        "params": {
            "n_layers": p.n_layers,
            "lambda0_nm": p.lambda0 * 1e9,
            "mean_optical_thickness_nm": p.mean_optical_thickness * 1e9,
            "jitter_sigma_optical_nm": p.jitter_sigma_optical * 1e9,
            "jitter_convention": p.jitter_convention,
            "materials": [material_to_json(m) for m in p.materials],
            "seed": p.seed,
        },
        "seed": s.seed,
        "layers": [
            {
                "material": layer.material.name,
                "thickness_nm": _thickness_to_nm_string(layer.thickness),
            }
            for layer in s.layers
        ],
    }


def structure_from_json(obj: dict) -> LayeredStructure:
    if not isinstance(obj, dict):
        raise ValueError("structure file: top-level JSON value must be an object")
    try:
        pobj = obj["params"]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = StructureParams(
                n_layers=int(pobj["n_layers"]),
                lambda0=float(pobj["lambda0_nm"]) * 1e-9,
                mean_optical_thickness=float(pobj["mean_optical_thickness_nm"]) * 1e-9,
                jitter_sigma_optical=float(pobj["jitter_sigma_optical_nm"]) * 1e-9,
                materials=tuple(material_from_json(m) for m in pobj["materials"]),
                seed=int(pobj["seed"]),
                jitter_convention=pobj.get("jitter_convention", "optical-std"),
            )
        seed = int(obj["seed"])
        layer_objs = obj["layers"]
    except KeyError as exc:
        raise ValueError(f"structure file: missing field {exc}") from exc

    by_name = {m.name: m for m in params.materials}
    layers = []
    for i, lobj in enumerate(layer_objs):
        try:
            name = lobj["material"]
            thickness = _thickness_from_nm_string(lobj["thickness_nm"])
        except (KeyError, TypeError, ArithmeticError) as exc:
            raise ValueError(f"structure file: layer {i}: malformed record ({exc})") from exc
        if name not in by_name:
            raise ValueError(
                f"structure file: layer {i}: unknown material {name!r} "
                f"(constituents: {sorted(by_name)})"
            )
        if thickness <= 0:
            raise ValueError(
                f"structure file: layer {i}: non-positive thickness "
                f"{lobj['thickness_nm']} nm"
            )
        layers.append(Layer(by_name[name], thickness))
    return LayeredStructure(layers=tuple(layers), params=params, seed=seed)


def save_structure(s: LayeredStructure, path) -> None:
    """Write a structure as JSON; thicknesses round-trip bit-exactly."""
    Path(path).write_text(
        json.dumps(structure_to_json(s), indent=1, sort_keys=True) + "\n"
    )


def load_structure(path) -> LayeredStructure:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"structure file {path}: invalid JSON: {exc}") from exc
    return structure_from_json(obj)
