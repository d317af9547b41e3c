"""Photon-correlation (HBT) analysis: g2 normalization, fitting, correction.

The antibunching model is the two-level form g2(tau) = 1 - (1-g0)exp(-|tau|/t)
with a free baseline near 1; no pump-induced bunching shoulder is modeled. At
low pump power the fitted timescale is the excited-state lifetime T1; output
metadata carries that caveat rather than asserting it.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NormalizationError, ValidationError
from .lsq import levenberg_marquardt


@dataclass
class G2Curve:
    """Normalized second-order correlation vs delay (ns)."""

    delays_ns: np.ndarray
    values: np.ndarray
    normalization: float

    def __post_init__(self):
        d = np.asarray(self.delays_ns, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.ndim != 1 or d.size != v.size:
            raise ValidationError("delays and values must be equal-length 1-D arrays")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("delays must be strictly ascending")
        if np.any(v < 0):
            raise ValidationError("g2 values must be non-negative")
        self.delays_ns = d
        self.values = v


def normalize_histogram(delays_ns, coincidences, window_ns):
    """Divide a coincidence histogram by its mean at |tau| >= window_ns.

    The window should sit at delays of at least ~5 expected lifetimes so the
    correlation has fully recovered there.
    """
    d = np.asarray(delays_ns, dtype=float)
    c = np.asarray(coincidences, dtype=float)
    if d.size != c.size:
        raise ValidationError("delays and coincidences must have equal length")
    if np.any(c < 0):
        raise ValidationError("coincidence counts must be non-negative")
    mask = np.abs(d) >= window_ns
    if not np.any(mask):
        raise NormalizationError(f"no bins at |tau| >= {window_ns} ns")
    level = float(np.mean(c[mask]))
    if level <= 0:
        raise NormalizationError("normalization window has zero mean counts")
    return G2Curve(delays_ns=d, values=c / level, normalization=level)


@dataclass
class G2Fit:
    g2_zero: float
    tau_ns: float
    baseline: float
    ok: bool
    tau_identifiable: bool = True
    iterations: int = 0


def fit_g2(curve, dead_window_ns=0.0):
    """Fit the two-level antibunching dip to a normalized curve.

    Bins with |tau| < dead_window_ns are excluded (detector jitter region).
    When the curve shows no dip the exponential timescale is unidentifiable:
    the fit returns g2_zero ~ baseline with ``tau_identifiable=False``.
    """
    tau = curve.delays_ns
    val = curve.values
    if dead_window_ns > 0:
        keep = np.abs(tau) >= dead_window_ns
        tau, val = tau[keep], val[keep]
    if tau.size < 8:
        raise ValidationError("too few bins to fit")

    span = float(np.max(np.abs(tau)))
    outer = np.abs(tau) >= 0.8 * span
    baseline0 = float(np.mean(val[outer]))
    i0 = int(np.argmin(np.abs(tau)))
    g0_init = float(val[i0])
    dip = baseline0 - g0_init

    if abs(dip) <= 1e-3 * max(baseline0, 1e-12):
        return G2Fit(g2_zero=g0_init, tau_ns=math.nan, baseline=baseline0,
                     ok=True, tau_identifiable=False)

    # first delay where the dip has recovered to within 1/e
    target = baseline0 - dip / math.e
    above = np.abs(tau)[val >= target]
    tau0 = float(np.min(above)) if above.size else span / 5.0
    tau0 = max(tau0, float(np.min(np.diff(curve.delays_ns))))

    def residuals(p):
        g0, t, base = p
        return base - (base - g0) * np.exp(-np.abs(tau) / abs(t)) - val

    res = levenberg_marquardt(residuals, np.array([g0_init, tau0, baseline0]))
    g2_zero, t_fit, baseline = res.x
    return G2Fit(g2_zero=float(max(g2_zero, 0.0)), tau_ns=float(abs(t_fit)),
                 baseline=float(baseline), ok=bool(res.ok), iterations=res.iterations)


def signal_fraction(signal_rate, background_rate):
    """rho = S/(S+B); the fraction of detected counts coming from the emitter."""
    if signal_rate < 0 or background_rate < 0:
        raise DomainError("rates must be non-negative")
    total = signal_rate + background_rate
    if total == 0:
        raise DomainError("signal and background cannot both be zero")
    return signal_rate / total


def background_correct(g2_meas, rho):
    """Remove uncorrelated background: g2_corr = (g2 - (1 - rho^2)) / rho^2.

    Accepts a scalar or an array. Values below the physical floor 1 - rho^2
    clamp to 0 with a warning. Composing corrections multiplies the rhos:
    correct(correct(x, r1), r2) == correct(x, r1*r2).
    """
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"signal fraction must lie in (0, 1], got {rho}")
    arr = np.asarray(g2_meas, dtype=float)
    corrected = (arr - (1.0 - rho * rho)) / (rho * rho)
    if np.any(corrected < 0):
        warnings.warn("g2 below the pure-background floor; clamping to 0", stacklevel=2)
        corrected = np.maximum(corrected, 0.0)
    if np.isscalar(g2_meas) or arr.ndim == 0:
        return float(corrected)
    return corrected


def correct_curve(curve, rho):
    """Pointwise background correction of a whole curve."""
    values = background_correct(curve.values, rho)
    return G2Curve(delays_ns=curve.delays_ns, values=values,
                   normalization=curve.normalization)


def read_histogram_csv(document):
    """Parse a "delay_ns,coincidences" CSV into (delays, coincidences)."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    lines = [ln for ln in document.splitlines() if ln.strip()]
    if not lines or lines[0].strip().lower() != "delay_ns,coincidences":
        raise ValidationError("expected header 'delay_ns,coincidences'")
    delays, counts = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise ValidationError(f"bad histogram row {ln!r}")
        try:
            delays.append(float(parts[0]))
            counts.append(float(parts[1]))
        except ValueError:
            raise ValidationError(f"non-numeric histogram row {ln!r}") from None
    return np.array(delays), np.array(counts)


def write_histogram_csv(delays_ns, coincidences):
    rows = ["delay_ns,coincidences"]
    rows += [f"{float(d)!r},{float(c)!r}" for d, c in zip(delays_ns, coincidences)]
    return ("\n".join(rows) + "\n").encode("utf-8")
