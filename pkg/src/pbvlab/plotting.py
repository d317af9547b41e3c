"""Static SVG figures for the CLI reports.

Outputs are self-contained and byte-reproducible: a fixed svg.hashsalt keeps
element ids stable and the date metadata is stripped.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .photophysics import AXIAL  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pbvlab"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def save_spectrum_svg(path, components, title):
    """Synthesized spectrum; axial lines are filled, perpendicular unfilled."""
    fig, ax = plt.subplots(figsize=(7, 4))
    lam = components.wavelengths_nm
    total = components.sideband.copy()
    for _, part in components.parts:
        total = total + part
    for t, part in components.parts:
        if t.weight <= 0:
            continue
        if t.polarization == AXIAL:
            ax.fill_between(lam, part, alpha=0.5, color="tab:blue",
                            label=f"{t.label} (axial, filled)")
        else:
            ax.plot(lam, part, color="tab:red", lw=1.2,
                    label=f"{t.label} (perpendicular)")
    if components.sideband.any():
        ax.plot(lam, components.sideband, color="tab:gray", lw=1.0, label="phonon sideband")
    ax.plot(lam, total, color="black", lw=0.8, alpha=0.6, label="total")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("relative intensity")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_g2_svg(path, curve, fit, corrected=None):
    import numpy as np

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.delays_ns, curve.values, ".", ms=3, color="tab:blue", label="data")
    if fit.tau_identifiable:
        tau = np.linspace(curve.delays_ns[0], curve.delays_ns[-1], 400)
        model = fit.baseline - (fit.baseline - fit.g2_zero) * np.exp(-np.abs(tau) / fit.tau_ns)
        ax.plot(tau, model, color="black", lw=1.2,
                label=f"fit: g2(0)={fit.g2_zero:.2f}, tau={fit.tau_ns:.2f} ns")
    if corrected is not None:
        ax.axhline(corrected, color="tab:red", ls="--", lw=1.0,
                   label=f"corrected g2(0)={corrected:.2f}")
    ax.axhline(0.5, color="gray", ls=":", lw=0.8)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_profile_svg(path, profile, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(profile.depth_nm, profile.ion_density_cm3, color="tab:blue", label="ions")
    ax.plot(profile.depth_nm, profile.vacancy_density_cm3, color="tab:red", label="vacancies")
    ax.set_xlabel("depth (nm)")
    ax.set_ylabel("density (cm$^{-3}$)")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
