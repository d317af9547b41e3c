import numpy as np
import pytest

from pbvlab.spectral import Spectrum


def lorentzian(lam, center, fwhm, amplitude, baseline):
    hw = 0.5 * fwhm
    return baseline + amplitude * hw * hw / ((lam - center) ** 2 + hw * hw)


def gaussian(lam, center, fwhm, amplitude, baseline):
    return baseline + amplitude * np.exp(-4.0 * np.log(2.0) * (lam - center) ** 2 / fwhm ** 2)


def make_spectrum(lam, counts, **meta):
    return Spectrum(np.asarray(lam, float), np.asarray(counts, float), meta)


def g2_model(tau, g0, tau_f, baseline=1.0):
    return baseline - (baseline - g0) * np.exp(-np.abs(tau) / tau_f)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
