"""Split-vacancy emitter modeling, ion implantation Monte Carlo, and
spectroscopy analysis (peak fits, ensemble statistics, photon correlations).
"""

from ._accel import ACCEL_MODE, NUMBA_ENABLED
from .photophysics import (
    DefectModel,
    LevelDiagram,
    Transition,
    available_presets,
    build_level_diagram,
    load_preset,
    synthesize_spectrum,
    thermal_occupation,
    transition_table,
)
from .spectral import (
    RegionTable,
    Spectrum,
    classify_region,
    detect_peaks,
    estimate_strain,
    fit_dipole_polarization,
    fit_line,
    fit_linewidth_vs_temperature,
    parse_spectrum,
    serialize_spectrum,
    shift_to_frequency,
)
from .ensemble import (
    AssignmentSet,
    build_histogram,
    independence_report,
    probabilities,
)
from .photon import (
    G2Curve,
    G2Fit,
    background_correct,
    fit_g2,
    normalize_histogram,
    signal_fraction,
)
from .implant import (
    DIAMOND,
    ImplantResult,
    Particle,
    TargetMaterial,
    depth_profile,
    electronic_stopping,
    scattering_angle,
    screening_function,
    simulate_implant,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEL_MODE",
    "NUMBA_ENABLED",
    "DefectModel",
    "LevelDiagram",
    "Transition",
    "available_presets",
    "build_level_diagram",
    "load_preset",
    "synthesize_spectrum",
    "thermal_occupation",
    "transition_table",
    "RegionTable",
    "Spectrum",
    "classify_region",
    "detect_peaks",
    "estimate_strain",
    "fit_dipole_polarization",
    "fit_line",
    "fit_linewidth_vs_temperature",
    "parse_spectrum",
    "serialize_spectrum",
    "shift_to_frequency",
    "AssignmentSet",
    "build_histogram",
    "independence_report",
    "probabilities",
    "G2Curve",
    "G2Fit",
    "background_correct",
    "fit_g2",
    "normalize_histogram",
    "signal_fraction",
    "DIAMOND",
    "ImplantResult",
    "Particle",
    "TargetMaterial",
    "depth_profile",
    "electronic_stopping",
    "scattering_angle",
    "screening_function",
    "simulate_implant",
    "__version__",
]
