"""Measured-spectrum handling: parsing, peak detection, line fits, regions.

Wavelengths are nm throughout. Frequency conversions use the small-shift
relation dnu = c*dlambda/lambda0**2. Line fits are damped least squares on a
single window at a time; overlapping peaks are fit independently per window.
"""

import io
import math
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter

from .constants import C_NM_THZ
from .errors import DomainError, FitError, ParseError, ValidationError
from .lsq import levenberg_marquardt

# Spectrometer resolution of the reference setup; fits at or below this FWHM
# are flagged as resolution-limited rather than deconvolved.
SPECTROMETER_RESOLUTION_NM = 0.1

_CSV_HEADER = "wavelength_nm,counts"
_MIN_ROWS = 8


@dataclass
class Spectrum:
    """Wavelength-ordered intensity trace with optional acquisition metadata."""

    wavelengths_nm: np.ndarray
    intensities: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.wavelengths_nm, dtype=float)
        i = np.asarray(self.intensities, dtype=float)
        if w.ndim != 1 or i.ndim != 1 or w.size != i.size:
            raise ValidationError("wavelengths and intensities must be equal-length 1-D arrays")
        if w.size < _MIN_ROWS:
            raise ValidationError(f"spectrum needs at least {_MIN_ROWS} samples, got {w.size}")
        if np.any(~np.isfinite(w)) or np.any(~np.isfinite(i)):
            raise ValidationError("spectrum contains non-finite values")
        if np.any(np.diff(w) <= 0):
            raise ValidationError("wavelengths must be strictly ascending")
        if np.any(i < 0):
            raise ValidationError("intensities must be non-negative")
        self.wavelengths_nm = w
        self.intensities = i

    def __len__(self):
        return self.wavelengths_nm.size


def parse_spectrum(document):
    """Parse a spectrum CSV (bytes, text, or binary file object).

    Format: optional leading ``# key=value`` comment lines, a
    ``wavelength_nm,counts`` header, then one sample per row. Rows are
    numbered from 1 starting at the first data row; the row number of the
    first offending sample is carried on the raised :class:`ParseError`.
    """
    if isinstance(document, bytes):
        text = document.decode("utf-8")
    elif isinstance(document, str):
        text = document
    elif hasattr(document, "read"):
        raw = document.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        raise ParseError(f"unsupported document type {type(document)!r}")

    meta = {}
    lines = text.splitlines()
    pos = 0
    while pos < len(lines) and lines[pos].lstrip().startswith("#"):
        body = lines[pos].lstrip()[1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = _coerce_meta(value.strip())
        pos += 1

    if pos >= len(lines) or lines[pos].strip().lower() != _CSV_HEADER:
        raise ParseError(f"expected header '{_CSV_HEADER}'")
    pos += 1

    wavelengths, intensities = [], []
    row = 0
    for line in lines[pos:]:
        if not line.strip():
            continue
        row += 1
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError("expected two comma-separated fields", row=row)
        try:
            w, c = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric sample {line.strip()!r}", row=row) from None
        if math.isnan(w) or math.isnan(c):
            raise ParseError("NaN sample", row=row)
        if c < 0:
            raise ParseError(f"negative counts {c}", row=row)
        if wavelengths and w <= wavelengths[-1]:
            raise ParseError(f"wavelength {w} not ascending", row=row)
        wavelengths.append(w)
        intensities.append(c)

    if row < _MIN_ROWS:
        raise ParseError(f"need at least {_MIN_ROWS} rows, got {row}")
    return Spectrum(np.array(wavelengths), np.array(intensities), meta)


def serialize_spectrum(spectrum):
    """Render a Spectrum to canonical CSV bytes (inverse of parse_spectrum)."""
    out = io.StringIO()
    for key in sorted(spectrum.meta):
        out.write(f"# {key}={spectrum.meta[key]}\n")
    out.write(_CSV_HEADER + "\n")
    for w, c in zip(spectrum.wavelengths_nm, spectrum.intensities):
        out.write(f"{float(w)!r},{float(c)!r}\n")
    return out.getvalue().encode("utf-8")


def read_spectrum(path):
    with open(path, "rb") as fh:
        return parse_spectrum(fh)


def _coerce_meta(value):
    try:
        return float(value)
    except ValueError:
        return value


# ---------------------------------------------------------------------------
# peak detection

@dataclass(frozen=True)
class PeakCandidate:
    center_nm: float
    height: float
    lo_nm: float
    hi_nm: float


def noise_scale(spectrum, baseline_window=51):
    """Robust noise estimate: 1.4826 * MAD of the baseline-subtracted trace."""
    resid = spectrum.intensities - _rolling_baseline(spectrum, baseline_window)
    return 1.4826 * float(np.median(np.abs(resid - np.median(resid))))


def _rolling_baseline(spectrum, baseline_window):
    size = min(baseline_window | 1, len(spectrum) | 1)  # odd, capped at length
    return median_filter(spectrum.intensities, size=size, mode="nearest")


def detect_peaks(spectrum, min_prominence=None, min_separation_nm=0.5,
                 prominence_sigma=6.0, baseline_window=51):
    """Find candidate emission lines above the local baseline.

    The baseline is a rolling median; the noise scale is 1.4826x the median
    absolute deviation of the residual. ``min_prominence`` is in counts; when
    omitted it defaults to ``prominence_sigma`` noise scales, which makes the
    result invariant under uniform intensity scaling. Candidates closer than
    ``min_separation_nm`` are merged keeping the higher one.
    """
    lam = spectrum.wavelengths_nm
    baseline = _rolling_baseline(spectrum, baseline_window)
    resid = spectrum.intensities - baseline
    noise = 1.4826 * float(np.median(np.abs(resid - np.median(resid))))
    if min_prominence is None:
        min_prominence = prominence_sigma * noise
    if min_prominence <= 0:
        raise DomainError("prominence must be positive")

    idx = [i for i in range(1, len(lam) - 1)
           if resid[i] > resid[i - 1] and resid[i] >= resid[i + 1]
           and resid[i] > min_prominence]

    # merge near-coincident candidates, higher residual wins
    kept = []
    for i in sorted(idx, key=lambda k: -resid[k]):
        if all(abs(lam[i] - lam[j]) >= min_separation_nm for j in kept):
            kept.append(i)
    kept.sort()

    step = float(np.median(np.diff(lam)))
    candidates = []
    for n, i in enumerate(kept):
        height = float(resid[i])
        hwhm = _halfwidth_estimate(lam, resid, i, height)
        half = max(min_separation_nm, 6.0 * hwhm, 4.0 * step)
        lo = lam[i] - half
        hi = lam[i] + half
        # do not bleed across neighboring candidates
        if n > 0:
            lo = max(lo, 0.5 * (lam[kept[n - 1]] + lam[i]))
        if n + 1 < len(kept):
            hi = min(hi, 0.5 * (lam[i] + lam[kept[n + 1]]))
        candidates.append(PeakCandidate(float(lam[i]), height, float(lo), float(hi)))
    return candidates


def _halfwidth_estimate(lam, resid, i, height):
    target = 0.5 * height
    left = right = None
    for j in range(i - 1, -1, -1):
        if resid[j] < target:
            left = lam[i] - lam[j]
            break
    for j in range(i + 1, len(lam)):
        if resid[j] < target:
            right = lam[j] - lam[i]
            break
    widths = [w for w in (left, right) if w is not None]
    if not widths:
        return float(lam[-1] - lam[0]) / 10.0
    return float(np.mean(widths))


# ---------------------------------------------------------------------------
# line fitting

@dataclass
class PeakFit:
    center_nm: float
    fwhm_nm: float
    amplitude: float
    baseline: float
    model: str
    rss: float
    ok: bool
    resolution_limited: bool = False
    iterations: int = 0


def _lorentzian(lam, center, fwhm, amplitude, baseline):
    hw = 0.5 * fwhm
    return baseline + amplitude * hw * hw / ((lam - center) ** 2 + hw * hw)


def _gaussian(lam, center, fwhm, amplitude, baseline):
    return baseline + amplitude * np.exp(-4.0 * math.log(2.0) * (lam - center) ** 2 / fwhm ** 2)


_MODELS = {"lorentzian": _lorentzian, "gaussian": _gaussian}


def fit_line(spectrum, window, model="lorentzian", resolution_nm=SPECTROMETER_RESOLUTION_NM):
    """Fit one emission line inside ``window`` ((lo_nm, hi_nm) or a candidate).

    Model: baseline + A*(G/2)^2/((lam-lam0)^2+(G/2)^2) (or the Gaussian
    analog, both parametrized by FWHM). Initialization comes from the window
    maximum; minimization is damped least squares converging when the
    relative parameter step drops below 1e-8 (at most 200 iterations).
    Non-convergence returns ok=False with best-effort parameters.
    """
    if model not in _MODELS:
        raise ValidationError(f"unknown line model {model!r}")
    if isinstance(window, PeakCandidate):
        lo, hi = window.lo_nm, window.hi_nm
    else:
        lo, hi = window
    lam_all = spectrum.wavelengths_nm
    mask = (lam_all >= lo) & (lam_all <= hi)
    lam = lam_all[mask]
    y = spectrum.intensities[mask]
    if lam.size < 8:
        raise ValidationError(f"window [{lo}, {hi}] contains {lam.size} samples, need >= 8")
    if float(np.ptp(y)) == 0.0:
        raise FitError("degenerate window: intensity has no variation")

    shape = _MODELS[model]
    i_max = int(np.argmax(y))
    b0 = float(np.percentile(y, 10))
    a0 = max(float(y[i_max]) - b0, 1e-12)
    c0 = float(lam[i_max])
    above = lam[y > b0 + 0.5 * a0]
    g0 = float(above[-1] - above[0]) if above.size >= 2 else float(lam[-1] - lam[0]) / 5.0
    g0 = max(g0, float(np.median(np.diff(lam))))

    def residuals(p):
        return shape(lam, p[0], p[1], p[2], p[3]) - y

    res = levenberg_marquardt(residuals, np.array([c0, g0, a0, b0]))
    center, fwhm, amplitude, baseline = res.x
    fwhm = abs(float(fwhm))  # shape is even in the width sign
    ok = bool(res.ok) and lo <= center <= hi and fwhm > 0
    return PeakFit(
        center_nm=float(center),
        fwhm_nm=fwhm,
        amplitude=float(amplitude),
        baseline=float(baseline),
        model=model,
        rss=float(res.rss),
        ok=ok,
        resolution_limited=bool(fwhm <= resolution_nm),
        iterations=res.iterations,
    )


# ---------------------------------------------------------------------------
# spectral regions

@dataclass(frozen=True)
class RegionTable:
    """Ordered, non-overlapping half-open wavelength windows [lo, hi)."""

    windows: tuple

    def __post_init__(self):
        seen = set()
        for label, lo, hi in self.windows:
            if lo >= hi:
                raise ValidationError(f"region {label}: lo {lo} must be < hi {hi}")
            if label in seen:
                raise ValidationError(f"duplicate region label {label!r}")
            seen.add(label)
        ordered = sorted(self.windows, key=lambda w: w[1])
        for (_, _, hi_a), (label_b, lo_b, _) in zip(ordered, ordered[1:]):
            if lo_b < hi_a:
                raise ValidationError(f"region {label_b} overlaps its predecessor")

    @property
    def labels(self):
        return tuple(label for label, _, _ in self.windows)

    def classify(self, center_nm):
        for label, lo, hi in self.windows:
            if lo <= center_nm < hi:
                return label
        return None

    @classmethod
    def from_json(cls, document):
        """Build from JSON text/bytes of [{label, lo_nm, hi_nm}, ...] (or a Path)."""
        if isinstance(document, Path):
            document = document.read_text()
        elif isinstance(document, bytes):
            document = document.decode("utf-8")
        entries = json.loads(document)
        return cls(tuple((e["label"], float(e["lo_nm"]), float(e["hi_nm"])) for e in entries))

    def to_json(self):
        return json.dumps([{"label": l, "lo_nm": lo, "hi_nm": hi}
                           for l, lo, hi in self.windows], indent=2)


# Default table for the 450 nm excitation survey, anchored to the observed
# landmarks (520 nm doublet, 545-550, 575, 640 nm lines). Boundaries are
# conventions, not measured quantities; pass a custom table for other
# excitation wavelengths.
DEFAULT_REGIONS = RegionTable((
    ("I", 505.0, 535.0),
    ("II", 535.0, 565.0),
    ("III", 565.0, 605.0),
    ("IV", 605.0, 700.0),
))


def classify_region(center_nm, regions=DEFAULT_REGIONS):
    """Label of the unique window containing ``center_nm``, else None."""
    return regions.classify(center_nm)


# ---------------------------------------------------------------------------
# conversions

def shift_to_frequency(lambda0_nm, delta_lambda_nm):
    """Frequency equivalent (THz) of a wavelength shift at lambda0."""
    if lambda0_nm <= 0:
        raise DomainError("lambda0 must be positive")
    return C_NM_THZ * delta_lambda_nm / lambda0_nm ** 2


@dataclass(frozen=True)
class StrainEstimate:
    stress_gpa: float
    strain: float


def estimate_strain(delta_nu_thz, stress_per_thz_gpa=1.0, youngs_modulus_gpa=1000.0):
    """Crude strain estimate from a level shift.

    Uses the scaling of roughly 1 GPa of stress per THz of line shift and a
    diamond Young's modulus of ~1 TPa; both are configurable.
    """
    if delta_nu_thz < 0:
        raise DomainError("frequency shift must be non-negative")
    if stress_per_thz_gpa <= 0:
        raise DomainError("stress conversion must be positive")
    if youngs_modulus_gpa <= 0:
        raise DomainError("Young's modulus must be positive")
    stress = delta_nu_thz * stress_per_thz_gpa
    return StrainEstimate(stress_gpa=stress, strain=stress / youngs_modulus_gpa)


# ---------------------------------------------------------------------------
# polarization and linewidth laws

@dataclass
class PolarizationFit:
    theta0_deg: float
    visibility: float
    theta0_defined: bool
    rss: float


def fit_dipole_polarization(angles_deg, intensities):
    """Fit I(theta) = C*(1 + V*cos 2(theta - theta0)) to polarizer data.

    Linear least squares on the basis (1, cos 2theta, sin 2theta); theta0 is
    reported in [0, 180) degrees and V clamped to [0, 1]. Constant data yields
    V = 0 with ``theta0_defined=False``.
    """
    th = np.asarray(angles_deg, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if th.size != y.size:
        raise ValidationError("angles and intensities must have equal length")
    if th.size < 6:
        raise ValidationError(f"need at least 6 samples, got {th.size}")
    if float(np.ptp(th)) < 150.0:
        raise ValidationError("angles must span at least 150 degrees")

    rad = np.radians(2.0 * th)
    basis = np.column_stack([np.ones_like(rad), np.cos(rad), np.sin(rad)])
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    c0, c1, c2 = (float(v) for v in coef)
    rss = float(np.sum((basis @ coef - y) ** 2))

    amp = math.hypot(c1, c2)
    scale = max(abs(c0), float(np.max(np.abs(y))), 1e-300)
    if amp <= 1e-9 * scale or c0 <= 0:
        return PolarizationFit(theta0_deg=0.0, visibility=0.0, theta0_defined=False, rss=rss)
    theta0 = math.degrees(0.5 * math.atan2(c2, c1)) % 180.0
    visibility = min(max(amp / c0, 0.0), 1.0)
    return PolarizationFit(theta0_deg=theta0, visibility=visibility, theta0_defined=True, rss=rss)


@dataclass
class PowerLawFit:
    gamma0_ghz: float
    amplitude: float
    exponent: float
    rss: float


def fit_linewidth_vs_temperature(points, exponent_bounds=(1.0, 7.0)):
    """Fit Gamma(T) = Gamma0 + A*T**n with Gamma0 >= 0 and bounded n.

    The exponent is found by a dense scan over the bounds with a linear
    solve for (Gamma0, A) at each candidate, then refined by golden-section
    search. The law is descriptive; no mechanism is implied.
    """
    pts = [(float(t), float(g)) for t, g in points]
    if len(pts) < 3:
        raise ValidationError(f"need at least 3 points, got {len(pts)}")
    T = np.array([p[0] for p in pts])
    G = np.array([p[1] for p in pts])
    if np.any(T <= 0):
        raise ValidationError("temperatures must be positive")
    n_lo, n_hi = exponent_bounds

    def solve(n):
        X = T ** n
        basis = np.column_stack([np.ones_like(X), X])
        coef, _, _, _ = np.linalg.lstsq(basis, G, rcond=None)
        g0, amp = float(coef[0]), float(coef[1])
        if g0 < 0:
            g0 = 0.0
            amp = float((G @ X) / (X @ X))
        rss = float(np.sum((g0 + amp * X - G) ** 2))
        return g0, amp, rss

    grid = np.linspace(n_lo, n_hi, 481)
    rss_grid = [solve(n)[2] for n in grid]
    k = int(np.argmin(rss_grid))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = solve(c)[2], solve(d)[2]
    for _ in range(90):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = solve(c)[2]
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = solve(d)[2]
    n_best = 0.5 * (a + b)
    g0, amp, rss = solve(n_best)
    return PowerLawFit(gamma0_ghz=g0, amplitude=amp, exponent=float(n_best), rss=rss)
