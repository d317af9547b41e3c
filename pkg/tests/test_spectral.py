import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian, lorentzian, make_spectrum
from pbvlab.errors import DomainError, FitError, ParseError, ValidationError
from pbvlab.spectral import (
    DEFAULT_REGIONS,
    RegionTable,
    Spectrum,
    classify_region,
    detect_peaks,
    estimate_strain,
    fit_dipole_polarization,
    fit_line,
    fit_linewidth_vs_temperature,
    noise_scale,
    parse_spectrum,
    serialize_spectrum,
    shift_to_frequency,
)


def csv_doc(rows, meta=()):
    lines = [f"# {k}={v}" for k, v in meta]
    lines.append("wavelength_nm,counts")
    lines += [f"{w},{c}" for w, c in rows]
    return ("\n".join(lines) + "\n").encode()


class TestParse:
    def test_valid_eight_rows(self):
        rows = [(500 + i, 10 + i) for i in range(8)]
        s = parse_spectrum(csv_doc(rows, meta=[("pillar_id", "p7"), ("temperature_K", 4.0)]))
        assert len(s) == 8
        assert s.meta["pillar_id"] == "p7"
        assert s.meta["temperature_K"] == 4.0

    def test_too_few_rows(self):
        with pytest.raises(ParseError):
            parse_spectrum(csv_doc([(500, 1), (501, 2), (502, 3)]))

    def test_descending_at_row_two(self):
        rows = [(500, 1), (499, 2)] + [(510 + i, 1) for i in range(8)]
        with pytest.raises(ParseError) as err:
            parse_spectrum(csv_doc(rows))
        assert err.value.row == 2

    def test_nan_rejected_with_row(self):
        rows = [(500 + i, 1) for i in range(5)] + [(506, float("nan"))] + \
               [(507 + i, 1) for i in range(4)]
        with pytest.raises(ParseError) as err:
            parse_spectrum(csv_doc(rows))
        assert err.value.row == 6

    def test_negative_counts_rejected(self):
        rows = [(500 + i, 1) for i in range(7)] + [(508, -3)]
        with pytest.raises(ParseError) as err:
            parse_spectrum(csv_doc(rows))
        assert err.value.row == 8

    def test_missing_header(self):
        with pytest.raises(ParseError):
            parse_spectrum(b"a,b\n1,2\n")

    @given(st.lists(st.integers(min_value=0, max_value=10_000), min_size=8, max_size=60),
           st.integers(min_value=0, max_value=4000))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_canonical(self, counts, start):
        lam = [400.0 + start * 0.05 + 0.1 * i for i in range(len(counts))]
        s = make_spectrum(lam, [float(c) for c in counts], pillar_id="p")
        blob = serialize_spectrum(s)
        assert serialize_spectrum(parse_spectrum(blob)) == blob


class TestDetect:
    def test_flat_noise_stays_empty(self, rng):
        lam = np.linspace(500, 540, 400)
        empties = 0
        for _ in range(30):
            s = make_spectrum(lam, np.clip(100 + rng.normal(0, 5, lam.size), 0, None))
            if not detect_peaks(s):
                empties += 1
        assert empties >= 29

    def test_single_lorentzian_found(self, rng):
        lam = np.arange(500.0, 540.0, 0.05)
        noise = 2.0
        y = lorentzian(lam, 520.0, 0.8, 100 * noise, 50.0) + rng.normal(0, noise, lam.size)
        cands = detect_peaks(make_spectrum(lam, np.clip(y, 0, None)))
        assert len(cands) == 1
        assert abs(cands[0].center_nm - 520.0) <= 0.05

    def test_doublet_resolved(self, rng):
        lam = np.arange(505.0, 535.0, 0.05)
        y = (lorentzian(lam, 515.0, 0.5, 400.0, 30.0)
             + lorentzian(lam, 520.0, 0.5, 300.0, 0.0)
             + rng.normal(0, 2.0, lam.size))
        cands = detect_peaks(make_spectrum(lam, np.clip(y, 0, None)))
        centers = sorted(c.center_nm for c in cands)
        assert len(centers) == 2
        assert centers[0] == pytest.approx(515.0, abs=0.1)
        assert centers[1] == pytest.approx(520.0, abs=0.1)

    def test_scale_invariance_in_sigma_units(self, rng):
        lam = np.arange(500.0, 540.0, 0.05)
        y = lorentzian(lam, 522.0, 0.6, 80.0, 20.0) + rng.normal(0, 1.0, lam.size)
        y = np.clip(y, 0, None)
        a = detect_peaks(make_spectrum(lam, y))
        b = detect_peaks(make_spectrum(lam, 37.0 * y))
        assert [c.center_nm for c in a] == [c.center_nm for c in b]

    def test_merge_keeps_higher(self, rng):
        lam = np.arange(500.0, 540.0, 0.05)
        y = (lorentzian(lam, 520.0, 0.4, 500.0, 10.0)
             + lorentzian(lam, 520.3, 0.4, 120.0, 0.0)
             + rng.normal(0, 1.0, lam.size))
        cands = detect_peaks(make_spectrum(lam, np.clip(y, 0, None)), min_separation_nm=1.0)
        assert len(cands) == 1
        assert cands[0].center_nm == pytest.approx(520.0, abs=0.1)


class TestFitLine:
    @pytest.mark.parametrize("model,shape", [("lorentzian", lorentzian), ("gaussian", gaussian)])
    def test_noise_free_round_trip(self, model, shape):
        lam = np.arange(515.0, 525.0, 0.02)
        truth = dict(center=520.0, fwhm=0.99, amplitude=1000.0, baseline=10.0)
        s = make_spectrum(lam, shape(lam, *truth.values()))
        fit = fit_line(s, (516.0, 524.0), model=model)
        assert fit.ok
        assert fit.center_nm == pytest.approx(truth["center"], rel=1e-6)
        assert fit.fwhm_nm == pytest.approx(truth["fwhm"], rel=1e-6)
        assert fit.amplitude == pytest.approx(truth["amplitude"], rel=1e-6)
        assert fit.baseline == pytest.approx(truth["baseline"], rel=1e-6, abs=1e-4)
        assert not fit.resolution_limited

    def test_poisson_noise_recovery(self):
        lam = np.arange(515.0, 525.0, 0.02)
        clean = lorentzian(lam, 520.0, 0.99, 1e4, 10.0)
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            s = make_spectrum(lam, rng.poisson(clean).astype(float))
            fit = fit_line(s, (516.0, 524.0))
            if abs(fit.center_nm - 520.0) <= 0.01 and abs(fit.fwhm_nm / 0.99 - 1) <= 0.05:
                hits += 1
        assert hits >= 19

    def test_all_zero_window_is_fit_error(self):
        lam = np.arange(515.0, 525.0, 0.1)
        s = make_spectrum(lam, np.zeros(lam.size))
        with pytest.raises(FitError):
            fit_line(s, (516.0, 524.0))

    def test_small_window_rejected(self):
        lam = np.arange(515.0, 525.0, 0.1)
        s = make_spectrum(lam, lorentzian(lam, 520.0, 1.0, 100.0, 1.0))
        with pytest.raises(ValidationError):
            fit_line(s, (519.8, 520.2))

    def test_resolution_limited_flag(self):
        lam = np.arange(519.0, 521.0, 0.005)
        s = make_spectrum(lam, lorentzian(lam, 520.0, 0.08, 500.0, 5.0))
        fit = fit_line(s, (519.2, 520.8))
        assert fit.ok and fit.resolution_limited


class TestRegions:
    def test_paper_landmarks(self):
        assert classify_region(520.0) == "I"
        assert classify_region(575.0) == "III"
        assert classify_region(640.0) == "IV"
        assert classify_region(499.0) is None

    def test_half_open_boundaries(self):
        assert classify_region(535.0) == "II"
        assert classify_region(700.0) is None

    def test_unique_label(self):
        for center in np.arange(500.0, 710.0, 0.7):
            labels = [l for l, lo, hi in DEFAULT_REGIONS.windows if lo <= center < hi]
            assert len(labels) <= 1
            assert classify_region(center) == (labels[0] if labels else None)

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            RegionTable((("a", 500.0, 540.0), ("b", 530.0, 560.0)))

    def test_json_round_trip(self):
        table = RegionTable.from_json(DEFAULT_REGIONS.to_json())
        assert table == DEFAULT_REGIONS


class TestConversions:
    def test_doublet_shift(self):
        assert shift_to_frequency(520.0, 1.8) == pytest.approx(1.9957, abs=2e-4)

    def test_spectrometer_limit_shift(self):
        ghz = shift_to_frequency(515.0, 0.1) * 1e3
        assert ghz == pytest.approx(113.0, abs=0.1)

    def test_zero_shift(self):
        assert shift_to_frequency(650.0, 0.0) == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            shift_to_frequency(0.0, 1.0)

    @given(st.floats(min_value=400, max_value=800),
           st.floats(min_value=-5, max_value=5))
    def test_linear_in_shift(self, lam0, dl):
        assert shift_to_frequency(lam0, 2 * dl) == pytest.approx(
            2 * shift_to_frequency(lam0, dl), rel=1e-12)

    def test_first_order_accuracy(self):
        for lam0 in (450.0, 520.0, 700.0):
            dl = 0.01 * lam0
            exact = 299792.458 / lam0 - 299792.458 / (lam0 + dl)
            approx = shift_to_frequency(lam0, dl)
            assert abs(approx / exact - 1.0) < 0.01


class TestStrain:
    def test_paper_exemplar(self):
        dnu = shift_to_frequency(650.0, 30.0)
        est = estimate_strain(dnu)
        assert 0.018 <= est.strain <= 0.023

    def test_unit_conversion(self):
        est = estimate_strain(1.0)
        assert est.stress_gpa == pytest.approx(1.0)
        assert est.strain == pytest.approx(0.001)

    def test_zero(self):
        assert estimate_strain(0.0).strain == 0.0

    def test_linearity(self):
        a = estimate_strain(3.7).strain
        b = estimate_strain(7.4).strain
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            estimate_strain(1.0, youngs_modulus_gpa=0.0)


class TestPolarization:
    def test_full_visibility_round_trip(self):
        th = np.arange(0.0, 181.0, 10.0)
        y = 50.0 * (1.0 + 1.0 * np.cos(np.radians(2 * (th - 30.0))))
        fit = fit_dipole_polarization(th, y)
        assert fit.theta0_defined
        assert fit.theta0_deg == pytest.approx(30.0, abs=1.0)
        assert fit.visibility == pytest.approx(1.0, abs=1e-9)

    def test_constant_data_undefined(self):
        th = np.arange(0.0, 181.0, 15.0)
        fit = fit_dipole_polarization(th, np.full(th.size, 80.0))
        assert fit.visibility == 0.0
        assert not fit.theta0_defined

    def test_orthogonal_pair(self):
        th = np.arange(0.0, 181.0, 10.0)
        a = fit_dipole_polarization(th, 40 * (1 + 0.9 * np.cos(np.radians(2 * (th - 20.0)))))
        b = fit_dipole_polarization(th, 70 * (1 + 0.8 * np.cos(np.radians(2 * (th - 110.0)))))
        gap = abs(a.theta0_deg - b.theta0_deg) % 180.0
        assert min(gap, 180.0 - gap) == pytest.approx(90.0, abs=2.0)

    def test_span_precondition(self):
        th = np.arange(0.0, 100.0, 10.0)
        with pytest.raises(ValidationError):
            fit_dipole_polarization(th, np.ones(th.size))

    def test_arity_precondition(self):
        with pytest.raises(ValidationError):
            fit_dipole_polarization([0, 60, 120, 180], [1, 1, 1, 1])


class TestLinewidthLaw:
    def test_three_point_interpolation(self):
        fit = fit_linewidth_vs_temperature([(4.0, 120.0), (100.0, 200.0), (160.0, 970.0)])
        assert fit.rss < 1e-6
        assert 1.0 <= fit.exponent <= 7.0
        # reproduce the input points through the fitted law
        for t, g in [(4.0, 120.0), (100.0, 200.0), (160.0, 970.0)]:
            assert fit.gamma0_ghz + fit.amplitude * t ** fit.exponent == pytest.approx(g, abs=1e-3)

    def test_synthetic_round_trip(self):
        g0, amp, n = 100.0, 2.5e-4, 3.0
        pts = [(t, g0 + amp * t ** n) for t in (10.0, 40.0, 80.0, 120.0, 160.0)]
        fit = fit_linewidth_vs_temperature(pts)
        assert fit.gamma0_ghz == pytest.approx(g0, rel=1e-4)
        assert fit.amplitude == pytest.approx(amp, rel=1e-4)
        assert fit.exponent == pytest.approx(n, rel=1e-4)

    def test_arity_error(self):
        with pytest.raises(ValidationError):
            fit_linewidth_vs_temperature([(4.0, 120.0), (100.0, 200.0)])

    def test_gamma0_clamped_nonnegative(self):
        pts = [(10.0, 1.0), (50.0, 30.0), (100.0, 260.0), (150.0, 900.0)]
        fit = fit_linewidth_vs_temperature(pts)
        assert fit.gamma0_ghz >= 0.0


class TestNoiseScale:
    def test_matches_known_sigma(self, rng):
        lam = np.linspace(500, 540, 2000)
        s = make_spectrum(lam, np.clip(200 + rng.normal(0, 7.0, lam.size), 0, None))
        assert noise_scale(s) == pytest.approx(7.0, rel=0.15)
