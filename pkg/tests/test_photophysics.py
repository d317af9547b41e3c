import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pbvlab.errors import CoverageError, DomainError, InvalidModelError, ValidationError
from pbvlab.photophysics import (
    DefectModel,
    available_presets,
    build_level_diagram,
    load_preset,
    presets_from_json,
    spectrum_components,
    synthesize_spectrum,
    thermal_occupation,
    transition_table,
)

# Hand-computed transition energies for the theory preset:
# zpl = 1239.842/544 eV, +-delta_gs/2 around it and +delta_es for the upper pair.
ZPL_THEORY = 2.279121323529412
EXPECTED_THEORY = {
    "A": ZPL_THEORY + 0.292 + 0.0127,
    "B": ZPL_THEORY + 0.292 - 0.0127,
    "C": ZPL_THEORY + 0.0127,
    "D": ZPL_THEORY - 0.0127,
}


def table_for(model):
    return transition_table(build_level_diagram(model), model)


def energies_by_label(model):
    return {t.label: t.energy_ev for t in table_for(model)}


class TestDefectModel:
    def test_presets_ship(self):
        assert available_presets() == ("gev", "pbv_experiment", "pbv_theory", "siv", "snv")

    def test_theory_preset_values(self):
        m = load_preset("pbv_theory")
        assert m.zpl_energy_ev == pytest.approx(ZPL_THEORY, rel=1e-12)
        assert m.delta_gs_ev == pytest.approx(0.0254)
        assert m.delta_es_ev == pytest.approx(0.292)

    def test_sub_preset_splittings(self):
        # intro-quoted ground splittings: 50 / 150 / 850 GHz
        h_ghz = 4.135667696e-6  # eV per GHz
        assert load_preset("siv").delta_gs_ev == pytest.approx(50 * h_ghz, rel=1e-6)
        assert load_preset("gev").delta_gs_ev == pytest.approx(150 * h_ghz, rel=1e-6)
        assert load_preset("snv").delta_gs_ev == pytest.approx(850 * h_ghz, rel=1e-6)
        assert load_preset("siv").dwf == pytest.approx(0.8)

    def test_invariants_enforced(self):
        with pytest.raises(InvalidModelError):
            DefectModel("bad", 2.3, -0.01, 0.3)
        with pytest.raises(InvalidModelError):
            DefectModel("bad", 2.3, 0.01, 0.0)
        with pytest.raises(InvalidModelError):
            DefectModel("bad", 2.3, 0.01, 0.3, dipole_weights=(0, 0, 0, 0))
        with pytest.raises(InvalidModelError):
            DefectModel("bad", 2.3, 0.01, 0.3, dipole_weights=(1, 1, -1, 1))
        with pytest.raises(InvalidModelError):
            DefectModel("bad", 2.3, 0.01, 0.3, dwf=1.5)

    def test_axis_normalized(self):
        m = DefectModel("m", 2.3, 0.01, 0.3, axis=(2, 2, 2))
        assert np.linalg.norm(m.axis) == pytest.approx(1.0, abs=1e-12)

    def test_unknown_preset(self):
        with pytest.raises(ValidationError):
            load_preset("nv_minus")

    def test_preset_json_rejects_unknown_keys(self):
        doc = json.dumps([{"name": "x", "zpl_nm": 600, "delta_gs_mev": 1,
                           "delta_es_mev": 2, "dipole_weights": [1, 1, 1, 1],
                           "dwf": 0.5, "bogus": 1}])
        with pytest.raises(ValidationError):
            presets_from_json(doc)


class TestLevelDiagram:
    def test_theory_energies_hand_oracle(self):
        en = energies_by_label(load_preset("pbv_theory"))
        for label, expected in EXPECTED_THEORY.items():
            assert en[label] == pytest.approx(expected, rel=1e-12)

    def test_rounded_literature_values(self):
        # with zpl quoted as 2.279 eV the four lines are 2.5837/2.5583/2.2917/2.2663
        m = DefectModel("pbv_rounded", 2.279, 0.0254, 0.292)
        en = energies_by_label(m)
        assert en["A"] == pytest.approx(2.5837, abs=1e-4)
        assert en["B"] == pytest.approx(2.5583, abs=1e-4)
        assert en["C"] == pytest.approx(2.2917, abs=1e-4)
        assert en["D"] == pytest.approx(2.2663, abs=1e-4)

    def test_diagram_invariants(self):
        m = load_preset("pbv_theory")
        d = build_level_diagram(m)
        assert d.ground_upper_ev - d.ground_lower_ev == pytest.approx(m.delta_gs_ev)
        assert d.excited_upper_ev - d.excited_lower_ev == pytest.approx(m.delta_es_ev)
        assert d.hole_picture

    def test_degenerate_limit(self):
        m = DefectModel("limit", 2.3, 1e-12, 1e-12)
        en = energies_by_label(m)
        for e in en.values():
            assert e == pytest.approx(2.3, abs=1e-11)

    def test_experimental_doublet_splitting(self):
        m = load_preset("pbv_experiment")
        en = energies_by_label(m)
        # h * 2 THz = 8.271335392 meV
        assert en["C"] - en["D"] == pytest.approx(8.271335392e-3, rel=1e-9)


class TestTransitionTable:
    def test_ordering_and_spacings(self):
        m = load_preset("pbv_theory")
        tt = table_for(m)
        assert [t.label for t in tt] == ["A", "B", "C", "D"]
        en = {t.label: t.energy_ev for t in tt}
        assert en["A"] - en["B"] == pytest.approx(m.delta_gs_ev, rel=1e-9)
        assert en["C"] - en["D"] == pytest.approx(m.delta_gs_ev, rel=1e-9)
        assert en["A"] - en["C"] == pytest.approx(m.delta_es_ev, rel=1e-9)
        assert en["B"] - en["D"] == pytest.approx(m.delta_es_ev, rel=1e-9)

    def test_polarizations(self):
        for name in available_presets():
            for t in table_for(load_preset(name)):
                expected = "axial" if t.label in ("B", "C") else "perpendicular"
                assert t.polarization == expected

    def test_wavelength_energy_consistency(self):
        for t in table_for(load_preset("pbv_theory")):
            assert t.wavelength_nm == pytest.approx(1239.842 / t.energy_ev, rel=1e-12)

    def test_equal_splittings_degenerate_bc(self):
        m = DefectModel("deg", 2.3, 0.05, 0.05)
        en = energies_by_label(m)
        assert en["B"] == pytest.approx(en["C"], rel=1e-14)


class TestThermalOccupation:
    def test_zero_temperature(self):
        assert thermal_occupation(0.292, 0.0) == (1.0, 0.0)

    def test_infinite_temperature(self):
        assert thermal_occupation(0.292, math.inf) == (0.5, 0.5)

    def test_room_temperature_boltzmann(self):
        p_lower, p_upper = thermal_occupation(0.292, 300.0)
        x = 0.292 / (8.617333e-5 * 300.0)
        direct = math.exp(-x) / (1.0 + math.exp(-x))
        assert p_upper == pytest.approx(direct, rel=1e-12)
        assert p_upper == pytest.approx(1.24e-5, rel=5e-3)

    def test_negative_temperature_rejected(self):
        with pytest.raises(DomainError):
            thermal_occupation(0.292, -1.0)

    @given(st.floats(min_value=0.0, max_value=1e5, allow_nan=False))
    def test_occupations_normalized(self, temperature):
        p_lower, p_upper = thermal_occupation(0.292, temperature)
        assert 0.0 <= p_upper <= p_lower <= 1.0
        assert p_lower + p_upper == pytest.approx(1.0, abs=1e-12)

    def test_monotone_in_temperature(self):
        temps = np.linspace(0.0, 2000.0, 60)
        uppers = [thermal_occupation(0.292, t)[1] for t in temps]
        assert all(b >= a for a, b in zip(uppers, uppers[1:]))


def count_peaks(spectrum, frac_of_max=0.01):
    y = spectrum.intensities
    floor = frac_of_max * y.max()
    return sum(1 for i in range(1, len(y) - 1)
               if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > floor)


GRID = (470.0, 560.0, 0.01)


class TestSynthesizeSpectrum:
    def test_two_peaks_cold(self):
        s = synthesize_spectrum(load_preset("pbv_theory"), 4.0, 50.0, GRID)
        assert count_peaks(s) == 2

    def test_four_peaks_hot(self):
        s = synthesize_spectrum(load_preset("pbv_theory"), 1e6, 50.0, GRID)
        assert count_peaks(s) == 4

    def test_equal_areas_infinite_temperature(self):
        comp = spectrum_components(load_preset("pbv_theory"), math.inf, 50.0, GRID)
        areas = [part.sum() * GRID[2] for _, part in comp.parts]
        assert max(areas) - min(areas) <= 1e-6 * max(areas)

    def test_zero_weight_line_absent(self):
        m = DefectModel("w0", ZPL_THEORY, 0.0254, 0.292, dipole_weights=(1, 1, 0, 1))
        comp = spectrum_components(m, math.inf, 50.0, GRID)
        areas = {t.label: part.sum() * GRID[2] for t, part in comp.parts}
        assert areas["C"] == 0.0
        assert areas["D"] > 0

    def test_total_integral_matches_weights(self):
        m = DefectModel("w", ZPL_THEORY, 0.0254, 0.292, dipole_weights=(0.5, 2.0, 1.0, 0.25))
        for temperature in (0.0, 77.0, 2000.0, math.inf):
            p_lower, p_upper = thermal_occupation(m.delta_es_ev, temperature)
            expected = (0.5 + 2.0) * p_upper + (1.0 + 0.25) * p_lower
            s = synthesize_spectrum(m, temperature, 80.0, GRID)
            integral = s.intensities.sum() * GRID[2]
            assert integral == pytest.approx(expected, rel=1e-4)

    def test_cold_spectrum_dark_at_upper_lines(self):
        m = load_preset("pbv_theory")
        s = synthesize_spectrum(m, 0.0, 50.0, GRID)
        tt = table_for(m)
        lam_ab = [t.wavelength_nm for t in tt if t.label in ("A", "B")]
        for lam0 in lam_ab:
            i = int(np.argmin(np.abs(s.wavelengths_nm - lam0)))
            assert s.intensities[i] < 1e-12 * s.intensities.max()

    def test_weights_bind_to_labels(self):
        base = (0.5, 2.0, 1.0, 0.25)
        perm = (1.0, 0.25, 0.5, 2.0)  # same multiset, different labels
        areas = {}
        for tag, weights in (("base", base), ("perm", perm)):
            m = DefectModel(tag, ZPL_THEORY, 0.0254, 0.292, dipole_weights=weights)
            comp = spectrum_components(m, math.inf, 50.0, GRID)
            areas[tag] = {t.label: part.sum() * GRID[2] for t, part in comp.parts}
        for label, w_base, w_perm in zip("ABCD", base, perm):
            assert areas["base"][label] == pytest.approx(0.5 * w_base, rel=1e-9)
            assert areas["perm"][label] == pytest.approx(0.5 * w_perm, rel=1e-9)

    def test_sideband_conserves_area(self):
        m = DefectModel("sb", ZPL_THEORY, 0.0254, 0.292, dwf=0.6)
        grid = (450.0, 650.0, 0.02)
        s = synthesize_spectrum(m, 4.0, 50.0, grid, sideband=True)
        assert s.intensities.sum() * grid[2] == pytest.approx(2.0, rel=1e-4)

    def test_grid_must_cover_lines(self):
        with pytest.raises(CoverageError):
            synthesize_spectrum(load_preset("pbv_theory"), 4.0, 50.0, (500.0, 560.0, 0.01))

    def test_linewidth_must_be_positive(self):
        with pytest.raises(DomainError):
            synthesize_spectrum(load_preset("pbv_theory"), 4.0, 0.0, GRID)
