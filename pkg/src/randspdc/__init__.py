"""Photon-pair emission from random nonlinear layered structures.

Pipeline: seeded structure generation -> transfer-matrix linear optics ->
two-photon joint spectral amplitude -> separability/entanglement analysis ->
disorder-ensemble statistics -> engineered states by angular superposition.
"""

__version__ = "0.1.0"

from .materials import (
    LINBO3,
    SIO2,
    VACUUM,
    ConstantIndex,
    Material,
    Sellmeier,
    builtin_materials,
    frozen_at,
    refractive_index,
)
from .structure import (
    LayeredStructure,
    ReferenceStructure,
    StructureParams,
    derive_seed,
    generate_structure,
    load_structure,
    periodic_structure,
    reference_structure,
    save_structure,
)
from .tmm import (
    IncidenceGeometry,
    LocalizationEstimate,
    ResolutionPolicy,
    ScatteringSolution,
    TransmissionSpectrum,
    layer_kz,
    localization_length,
    scattering_solution,
    transmission_spectrum,
    transmittance_and_log,
)
from .spdc import (
    ContainerError,
    EmissionGeometry,
    PumpPulse,
    TwoPhotonAmplitude,
    layer_overlap,
    load_amplitude,
    mode_function,
    normalization_value,
    normalize_amplitude,
    reference_amplitude,
    relative_pair_rate,
    relative_spectrum,
    save_amplitude,
    two_photon_amplitude,
)
from .analysis import (
    DispersionTrack,
    EnsembleStats,
    Peak,
    SchmidtResult,
    find_peaks,
    hom_visibility,
    peak_angle_dispersion,
    peak_width_histogram,
    schmidt_decomposition,
    temporal_wavepacket,
)
from .synthesis import (
    SuperpositionResult,
    compensation_phases,
    superpose_components,
    superpose_pinholes,
    superpose_range,
)

__all__ = [name for name in dir() if not name.startswith("_")]
