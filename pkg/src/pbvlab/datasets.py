"""Synthetic datasets that reproduce published summary statistics.

The 205-pillar co-occurrence dataset reconstructs integer joint counts whose
probability tables round to the published three-region values; the survey
generator turns assignment sets into parseable spectra for pipeline tests.
"""

import numpy as np

from .ensemble import AssignmentSet
from .spectral import Spectrum

# Integer joint counts for 205 pillars over regions I-III whose ratios land
# within +-0.01 of the published table: p = (0.26, 0.22, 0.40) and
# P(i|j) rows (1.00, 0.29, 0.24), (0.25, 1.00, 0.26), (0.38, 0.46, 1.00).
# Diagonal: 53/205 = 0.259, 45/205 = 0.220, 82/205 = 0.400;
# off-diagonal: 13/45 = 0.289, 20/82 = 0.244, 21/82 = 0.256, etc.
FIG_S5_LABELS = ("I", "II", "III")
FIG_S5_COUNTS = np.array([
    [53, 13, 20],
    [13, 45, 21],
    [20, 21, 82],
], dtype=np.int64)
FIG_S5_N_PILLARS = 205

# representative in-region line positions (nm) used when spectra are needed
REGION_CENTERS_NM = {"I": 520.0, "II": 550.0, "III": 575.0, "IV": 640.0}


def _subset_decomposition(counts, n_pillars, n_triple):
    """Per-subset pillar counts realizing a 3x3 joint count matrix exactly."""
    c12, c13, c23 = counts[0, 1], counts[0, 2], counts[1, 2]
    d1, d2, d3 = counts[0, 0], counts[1, 1], counts[2, 2]
    x = n_triple
    sizes = {
        ("I", "II", "III"): x,
        ("I", "II"): c12 - x,
        ("I", "III"): c13 - x,
        ("II", "III"): c23 - x,
        ("I",): d1 - c12 - c13 + x,
        ("II",): d2 - c12 - c23 + x,
        ("III",): d3 - c13 - c23 + x,
    }
    occupied = sum(sizes.values())
    sizes[()] = n_pillars - occupied
    if any(v < 0 for v in sizes.values()):
        raise ValueError("inconsistent joint counts")
    return sizes


def fig_s5_assignments():
    """205 assignment sets whose joint counts equal FIG_S5_COUNTS exactly."""
    sizes = _subset_decomposition(FIG_S5_COUNTS, FIG_S5_N_PILLARS, n_triple=5)
    assignments = []
    k = 0
    for subset in sorted(sizes, key=lambda s: (-len(s), s)):
        for _ in range(sizes[subset]):
            k += 1
            centers = tuple(REGION_CENTERS_NM[r] for r in subset)
            assignments.append(AssignmentSet(
                pillar_id=f"pillar_{k:03d}",
                regions_present=frozenset(subset),
                peak_centers_nm=centers,
            ))
    return assignments


def survey_spectrum(assignment, rng, grid_nm=(505.0, 700.0, 0.2), amplitude=800.0,
                    fwhm_nm=0.6, baseline=40.0, noise=3.0):
    """One synthetic pillar spectrum with a Lorentzian per present region."""
    lo, hi, step = grid_nm
    lam = np.arange(lo, hi + 0.5 * step, step)
    signal = np.full(lam.shape, baseline, dtype=float)
    for center in assignment.peak_centers_nm:
        hw = 0.5 * fwhm_nm
        signal += amplitude * hw * hw / ((lam - center) ** 2 + hw * hw)
    noisy = np.clip(signal + rng.normal(0.0, noise, lam.size), 0.0, None)
    return Spectrum(lam, noisy, {"pillar_id": assignment.pillar_id})


def survey_spectra(assignments, seed=7, **kwargs):
    """Deterministic list of (pillar_id, Spectrum) for a whole survey."""
    rng = np.random.default_rng(seed)
    return [(a.pillar_id, survey_spectrum(a, rng, **kwargs)) for a in assignments]
