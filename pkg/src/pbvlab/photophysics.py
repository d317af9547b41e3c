"""Four-level split-vacancy emission model.

A group-IV split-vacancy center has one orbital doublet in the ground state
(split by delta_gs) and one in the excited state (split by delta_es), giving
four zero-phonon transitions A > B > C > D in energy. C and D originate from
the lower excited orbital and dominate at low temperature; B and C are
polarized along the defect axis, A and D perpendicular to it. Emission
spectra are synthesized as Boltzmann-weighted Lorentzian lines.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .constants import C_NM_THZ, EV_NM, KB_EV_PER_K
from .errors import CoverageError, DomainError, InvalidModelError, ValidationError
from .spectral import Spectrum

AXIAL = "axial"
PERPENDICULAR = "perpendicular"

_LABELS = ("A", "B", "C", "D")
# fraction of a truncated line's area kept inside +-10 FWHM
_TRUNC_FWHM = 10.0


def _unit(vec):
    v = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0:
        raise InvalidModelError("defect axis must be a non-zero vector")
    return tuple(v / n)


@dataclass(frozen=True)
class DefectModel:
    """Parametric description of a split-vacancy emitter.

    ``zpl_energy_ev`` is the centroid of the low-temperature C/D doublet (not
    of all four lines). ``dipole_weights`` are the relative squared dipole
    matrix elements for transitions A, B, C, D in that order; absolute scale
    is arbitrary. ``dwf`` is the fraction of emission in the zero-phonon line.
    """

    name: str
    zpl_energy_ev: float
    delta_gs_ev: float
    delta_es_ev: float
    dipole_weights: tuple = (1.0, 1.0, 1.0, 1.0)
    dwf: float = 1.0
    axis: tuple = field(default=(0.5773502691896258,) * 3)

    def __post_init__(self):
        if self.zpl_energy_ev <= 0:
            raise InvalidModelError(f"zpl energy must be positive, got {self.zpl_energy_ev}")
        if self.delta_gs_ev <= 0 or self.delta_es_ev <= 0:
            raise InvalidModelError("orbital splittings must be positive")
        weights = tuple(float(w) for w in self.dipole_weights)
        if len(weights) != 4:
            raise InvalidModelError("dipole_weights must have exactly four entries (A, B, C, D)")
        if any(w < 0 for w in weights) or all(w == 0 for w in weights):
            raise InvalidModelError("dipole weights must be non-negative with at least one positive")
        if not 0.0 <= self.dwf <= 1.0:
            raise InvalidModelError(f"Debye-Waller factor must lie in [0, 1], got {self.dwf}")
        object.__setattr__(self, "dipole_weights", weights)
        object.__setattr__(self, "axis", _unit(self.axis))


@dataclass(frozen=True)
class LevelDiagram:
    """Hole-picture level energies (eV); ground_lower is the reference zero."""

    ground_lower_ev: float
    ground_upper_ev: float
    excited_lower_ev: float
    excited_upper_ev: float
    hole_picture: bool = True


@dataclass(frozen=True)
class Transition:
    label: str
    energy_ev: float
    wavelength_nm: float
    polarization: str
    weight: float


def build_level_diagram(model):
    """Level energies implied by the model's splittings and ZPL convention.

    Convention: D = zpl - delta_gs/2, C = zpl + delta_gs/2,
    B = zpl + delta_es - delta_gs/2, A = zpl + delta_es + delta_gs/2, so the
    C/D doublet originates from the lower excited orbital.
    """
    excited_lower = model.zpl_energy_ev + 0.5 * model.delta_gs_ev
    return LevelDiagram(
        ground_lower_ev=0.0,
        ground_upper_ev=model.delta_gs_ev,
        excited_lower_ev=excited_lower,
        excited_upper_ev=excited_lower + model.delta_es_ev,
    )


def transition_table(diagram, model):
    """The four zero-phonon transitions, sorted by decreasing energy.

    B and C are polarized along the defect axis, A and D perpendicular to it.
    """
    wa, wb, wc, wd = model.dipole_weights
    energies = {
        "A": diagram.excited_upper_ev - diagram.ground_lower_ev,
        "B": diagram.excited_upper_ev - diagram.ground_upper_ev,
        "C": diagram.excited_lower_ev - diagram.ground_lower_ev,
        "D": diagram.excited_lower_ev - diagram.ground_upper_ev,
    }
    pol = {"A": PERPENDICULAR, "B": AXIAL, "C": AXIAL, "D": PERPENDICULAR}
    weights = {"A": wa, "B": wb, "C": wc, "D": wd}
    rows = [
        Transition(label, energies[label], EV_NM / energies[label], pol[label], weights[label])
        for label in _LABELS
    ]
    rows.sort(key=lambda t: (-t.energy_ev, t.label))
    return tuple(rows)


def thermal_occupation(delta_es_ev, temperature_k):
    """Boltzmann occupation (p_lower, p_upper) of the excited-orbital pair.

    T = 0 is the limit (1, 0); T -> inf tends to (1/2, 1/2).
    """
    if delta_es_ev <= 0:
        raise DomainError("excited-state splitting must be positive")
    if temperature_k < 0:
        raise DomainError(f"temperature must be non-negative, got {temperature_k}")
    if math.isinf(temperature_k):
        return 0.5, 0.5
    kt = KB_EV_PER_K * temperature_k
    if kt == 0.0:  # includes the subnormal-T underflow
        return 1.0, 0.0
    x = delta_es_ev / kt
    p_lower = 1.0 / (1.0 + math.exp(-x))
    return p_lower, 1.0 - p_lower


# ---------------------------------------------------------------------------
# spectrum synthesis

def _fwhm_nm(wavelength_nm, linewidth_ghz):
    return wavelength_nm ** 2 * (linewidth_ghz * 1e-3) / C_NM_THZ


def _lorentzian_bins(edges, center, fwhm, area):
    """Exact per-bin integral of a Lorentzian truncated at +-10 FWHM.

    Truncation gives the line compact support and the window-renormalized
    area exactly ``area``, so spectrum integrals close to float precision on
    any covering grid.
    """
    lo = center - _TRUNC_FWHM * fwhm
    hi = center + _TRUNC_FWHM * fwhm
    q = np.clip(edges, lo, hi)
    cdf = np.arctan(2.0 * (q - center) / fwhm)
    coverage = 2.0 * math.atan(2.0 * _TRUNC_FWHM)
    return area * np.diff(cdf) / coverage


def _gaussian_bins(edges, center, fwhm, area):
    from scipy.special import erf

    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    lo = center - _TRUNC_FWHM * fwhm
    hi = center + _TRUNC_FWHM * fwhm
    q = np.clip(edges, lo, hi)
    cdf = erf((q - center) / (sigma * math.sqrt(2.0)))
    coverage = 2.0 * erf(_TRUNC_FWHM * fwhm / (sigma * math.sqrt(2.0)))
    return area * np.diff(cdf) / coverage


@dataclass
class SpectrumComponents:
    """Per-transition contributions on a common wavelength grid."""

    wavelengths_nm: np.ndarray
    parts: list            # (Transition, intensity array) pairs
    sideband: np.ndarray   # zeros when the sideband is disabled


def spectrum_components(model, temperature_k, linewidth_ghz, grid, sideband=False,
                        phonon_energy_mev=60.0, sideband_fwhm_mev=80.0):
    """Synthesize each line on the grid; grid is (lo_nm, hi_nm, step_nm).

    Line area = dipole weight x occupation of the originating excited level
    (A, B from the upper, C, D from the lower). With ``sideband`` enabled a
    fraction (1 - dwf) of each line's area moves into a broad Gaussian
    red-shifted by ``phonon_energy_mev``.
    """
    lo, hi, step = (float(v) for v in grid)
    if step <= 0 or hi <= lo:
        raise DomainError(f"bad grid ({lo}, {hi}, {step})")
    if linewidth_ghz <= 0:
        raise DomainError("linewidth must be positive")
    n = int(math.floor((hi - lo) / step)) + 1
    lam = lo + step * np.arange(n)
    edges = lo - 0.5 * step + step * np.arange(n + 1)

    diagram = build_level_diagram(model)
    transitions = transition_table(diagram, model)
    for t in transitions:
        if not (lo <= t.wavelength_nm <= hi):
            raise CoverageError(
                f"grid [{lo}, {hi}] nm does not cover transition {t.label} at "
                f"{t.wavelength_nm:.2f} nm")

    p_lower, p_upper = thermal_occupation(model.delta_es_ev, temperature_k)
    occupation = {"A": p_upper, "B": p_upper, "C": p_lower, "D": p_lower}

    zpl_fraction = model.dwf if sideband else 1.0
    parts = []
    sb_total = np.zeros(n)
    for t in transitions:
        area = t.weight * occupation[t.label]
        fwhm = _fwhm_nm(t.wavelength_nm, linewidth_ghz)
        parts.append((t, _lorentzian_bins(edges, t.wavelength_nm, fwhm, zpl_fraction * area) / step))
        if sideband and area > 0 and model.dwf < 1.0:
            e_sb = t.energy_ev - phonon_energy_mev * 1e-3
            if e_sb <= 0:
                raise DomainError("phonon energy exceeds the transition energy")
            lam_sb = EV_NM / e_sb
            fwhm_sb = lam_sb ** 2 * (sideband_fwhm_mev * 1e-3) / EV_NM
            sb_total += _gaussian_bins(edges, lam_sb, fwhm_sb, (1.0 - model.dwf) * area) / step
    return SpectrumComponents(wavelengths_nm=lam, parts=parts, sideband=sb_total)


def synthesize_spectrum(model, temperature_k, linewidth_ghz, grid, sideband=False,
                        phonon_energy_mev=60.0, sideband_fwhm_mev=80.0):
    """Total emission spectrum for the model at the given temperature."""
    comp = spectrum_components(model, temperature_k, linewidth_ghz, grid, sideband,
                               phonon_energy_mev, sideband_fwhm_mev)
    total = comp.sideband.copy()
    for _, part in comp.parts:
        total += part
    meta = {
        "model": model.name,
        "temperature_K": float(temperature_k),
        "linewidth_ghz": float(linewidth_ghz),
        "sideband": sideband,
    }
    return Spectrum(comp.wavelengths_nm, total, meta)


# ---------------------------------------------------------------------------
# presets

_REQUIRED_KEYS = {"name", "zpl_nm", "delta_gs_mev", "delta_es_mev", "dipole_weights", "dwf"}
_OPTIONAL_KEYS = {"axis", "notes"}


def presets_from_json(document):
    """Parse a JSON array of preset records into DefectModels by name.

    Record schema: {name, zpl_nm, delta_gs_mev, delta_es_mev,
    dipole_weights: [4], dwf} with optional ``axis`` and ``notes``.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    records = json.loads(document)
    models = {}
    for rec in records:
        keys = set(rec)
        missing = _REQUIRED_KEYS - keys
        unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
        if missing:
            raise ValidationError(f"preset record missing keys {sorted(missing)}")
        if unknown:
            raise ValidationError(f"preset record has unknown keys {sorted(unknown)}")
        model = DefectModel(
            name=rec["name"],
            zpl_energy_ev=EV_NM / float(rec["zpl_nm"]),
            delta_gs_ev=float(rec["delta_gs_mev"]) * 1e-3,
            delta_es_ev=float(rec["delta_es_mev"]) * 1e-3,
            dipole_weights=tuple(rec["dipole_weights"]),
            dwf=float(rec["dwf"]),
            axis=tuple(rec.get("axis", (1.0, 1.0, 1.0))),
        )
        models[model.name] = model
    return models


def _shipped_presets():
    doc = resources.files("pbvlab").joinpath("data/presets.json").read_text()
    return presets_from_json(doc)


def available_presets():
    return tuple(sorted(_shipped_presets()))


def load_preset(name):
    presets = _shipped_presets()
    try:
        return presets[name]
    except KeyError:
        raise ValidationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(presets))}") from None
