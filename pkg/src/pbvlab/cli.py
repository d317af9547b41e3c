"""Command-line interface.

Subcommands: spectrum | analyze | g2 | implant | strain. Global flags --out,
--seed and --config apply to every subcommand; a JSON config file supplies
the same parameters as the flags (flags win) and unknown keys are rejected.

Exit codes: 0 success, 2 usage/input error, 3 numeric failure. All data
outputs are byte-reproducible for fixed inputs and seed; wall-clock
timestamps go only to the run.log sidecar.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ensemble, photon, spectral
from ._accel import ACCEL_MODE
from .datasets import REGION_CENTERS_NM  # noqa: F401  (handy for demos)
from .errors import (DomainError, FitError, NumericError, ParseError,
                     PbvlabError, ValidationError)
from .implant import (TARGET_PRESETS, Particle, TargetMaterial, depth_profile,
                      profile_to_csv, simulate_implant)
from .photophysics import load_preset, spectrum_components, thermal_occupation
from .spectral import DEFAULT_REGIONS, RegionTable

SCHEMA_VERSION = 1

_CONFIG_KEYS = {
    "spectrum": {"preset", "temperature_k", "linewidth_ghz", "grid", "sideband",
                 "phonon_energy_mev", "sideband_fwhm_mev"},
    "analyze": {"input_dir", "regions", "bin_nm", "min_separation_nm",
                "prominence_sigma", "tol", "model"},
    "g2": {"input", "rho", "window_ns", "dead_window_ns"},
    "implant": {"ion", "target", "energy_kev", "n_ions", "seed", "mode",
                "bin_nm", "dose_per_cm2", "n_jobs"},
    "strain": {"lambda0_nm", "shift_nm", "stress_per_thz_gpa", "youngs_modulus_gpa"},
}


def _load_config(path, subcommand):
    if path is None:
        return {}
    cfg = json.loads(Path(path).read_text())
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS[subcommand]
    if unknown:
        raise ValidationError(
            f"unknown config keys for {subcommand}: {sorted(unknown)}")
    return cfg


def _pick(args_value, cfg, key, default):
    if args_value is not None:
        return args_value
    return cfg.get(key, default)


def _write(out_dir, name, data):
    path = Path(out_dir) / name
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)
    return path


def _write_json(out_dir, name, payload):
    return _write(out_dir, name, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _log(out_dir, argv):
    with open(Path(out_dir) / "run.log", "a") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} pbvlab {' '.join(argv)}\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_spectrum(args, cfg, out_dir):
    preset = _pick(args.preset, cfg, "preset", "pbv_theory")
    temperature = float(_pick(args.temperature_k, cfg, "temperature_k", 4.0))
    linewidth = float(_pick(args.linewidth_ghz, cfg, "linewidth_ghz", 100.0))
    sideband = bool(_pick(args.sideband or None, cfg, "sideband", False))
    model = load_preset(preset)

    grid = _pick(args.grid, cfg, "grid", None)
    if isinstance(grid, str):
        grid = tuple(float(v) for v in grid.split(":"))
    if grid is None:
        from .photophysics import build_level_diagram, transition_table
        waves = [t.wavelength_nm for t in transition_table(build_level_diagram(model), model)]
        grid = (min(waves) - 10.0, max(waves) + 10.0, 0.01)

    comp = spectrum_components(model, temperature, linewidth, grid, sideband=sideband,
                               phonon_energy_mev=float(cfg.get("phonon_energy_mev", 60.0)),
                               sideband_fwhm_mev=float(cfg.get("sideband_fwhm_mev", 80.0)))
    total = comp.sideband.copy()
    for _, part in comp.parts:
        total += part
    spec = spectral.Spectrum(comp.wavelengths_nm, total, {
        "model": model.name, "temperature_K": temperature, "linewidth_ghz": linewidth})
    _write(out_dir, "spectrum.csv", spectral.serialize_spectrum(spec))

    p_lower, p_upper = thermal_occupation(model.delta_es_ev, temperature)
    occupation = {"A": p_upper, "B": p_upper, "C": p_lower, "D": p_lower}
    payload = {
        "schema_version": SCHEMA_VERSION,
        "model": model.name,
        "temperature_K": temperature,
        "linewidth_ghz": linewidth,
        "occupations": {"lower": p_lower, "upper": p_upper},
        "transitions": [
            {"label": t.label, "energy_ev": t.energy_ev, "wavelength_nm": t.wavelength_nm,
             "polarization": t.polarization, "weight": t.weight,
             "area": t.weight * occupation[t.label]}
            for t, _ in comp.parts
        ],
    }
    _write_json(out_dir, "transitions.json", payload)

    from .plotting import save_spectrum_svg
    save_spectrum_svg(Path(out_dir) / "spectrum.svg", comp,
                      f"{model.name}, T = {temperature:g} K")
    return 0


def cmd_analyze(args, cfg, out_dir):
    input_dir = Path(_pick(args.input_dir, cfg, "input_dir", "."))
    regions_path = _pick(args.regions, cfg, "regions", None)
    regions = RegionTable.from_json(Path(regions_path).read_text()) if regions_path \
        else DEFAULT_REGIONS
    bin_nm = float(_pick(args.bin_nm, cfg, "bin_nm", 0.5))
    min_sep = float(_pick(args.min_separation_nm, cfg, "min_separation_nm", 0.5))
    sigma = float(_pick(args.prominence_sigma, cfg, "prominence_sigma", 6.0))
    tol = float(_pick(args.tol, cfg, "tol", 0.08))
    model = _pick(args.model, cfg, "model", "lorentzian")

    files = sorted(input_dir.glob("*.csv"))
    warnings_list = []
    per_file = []
    assignments = []
    all_centers = []
    for path in files:
        try:
            spec = spectral.read_spectrum(path)
        except (ParseError, ValidationError, OSError) as exc:
            warnings_list.append(f"{path.name}: {exc}")
            continue
        pillar = str(spec.meta.get("pillar_id", path.stem))
        fits = []
        centers = []
        for cand in spectral.detect_peaks(spec, min_separation_nm=min_sep,
                                          prominence_sigma=sigma):
            try:
                fit = spectral.fit_line(spec, cand, model=model)
            except (FitError, ValidationError) as exc:
                warnings_list.append(f"{path.name}: window {cand.center_nm:.1f} nm: {exc}")
                continue
            fits.append(fit)
            if fit.ok:
                centers.append(fit.center_nm)
        per_file.append({
            "file": path.name,
            "pillar_id": pillar,
            "peaks": [{"center_nm": f.center_nm, "fwhm_nm": f.fwhm_nm,
                       "amplitude": f.amplitude, "baseline": f.baseline,
                       "model": f.model, "rss": f.rss, "ok": f.ok,
                       "resolution_limited": f.resolution_limited,
                       "region": regions.classify(f.center_nm)}
                      for f in fits],
        })
        assignments.append(ensemble.assignment_from_centers(pillar, centers, regions))
        all_centers.extend(centers)

    if not assignments:
        raise ValidationError(f"no parsable spectrum CSVs in {input_dir}")

    _write_json(out_dir, "peaks.json",
                {"schema_version": SCHEMA_VERSION, "files": per_file})

    hist = ensemble.build_histogram(all_centers, bin_nm=bin_nm) if all_centers else None
    rows = ["bin_lo_nm,bin_hi_nm,count"]
    if hist is not None:
        for lo, hi, n in zip(hist.edges_nm[:-1], hist.edges_nm[1:], hist.counts):
            rows.append(f"{float(lo)!r},{float(hi)!r},{int(n)}")
    _write(out_dir, "histogram.csv", "\n".join(rows) + "\n")

    report = ensemble.probabilities(assignments, regions.labels)
    verdicts = ensemble.independence_report(report, tol=tol)
    payload = {"schema_version": SCHEMA_VERSION,
               "n_files": len(files),
               "n_parsed": len(assignments),
               "n_warnings": len(warnings_list),
               "warnings": warnings_list}
    payload.update(ensemble.report_to_dict(report, verdicts))
    _write_json(out_dir, "report.json", payload)
    return 0


def cmd_g2(args, cfg, out_dir):
    input_path = _pick(args.input, cfg, "input", None)
    if input_path is None:
        raise ValidationError("g2 needs an input histogram CSV (--input)")
    rho = _pick(args.rho, cfg, "rho", None)
    dead = float(_pick(args.dead_window_ns, cfg, "dead_window_ns", 0.0))

    delays, coincidences = photon.read_histogram_csv(Path(input_path).read_bytes())
    window = _pick(args.window_ns, cfg, "window_ns", None)
    if window is None:
        window = 0.6 * float(np.max(np.abs(delays)))
    curve = photon.normalize_histogram(delays, coincidences, float(window))
    fit = photon.fit_g2(curve, dead_window_ns=dead)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "g2_zero_raw": fit.g2_zero,
        "tau_ns": None if not fit.tau_identifiable else fit.tau_ns,
        "tau_identifiable": fit.tau_identifiable,
        "baseline": fit.baseline,
        "ok": fit.ok,
        "normalization_counts": curve.normalization,
        "window_ns": float(window),
        "tau_note": "tau equals the excited-state lifetime only at low pump power",
    }
    corrected = None
    if rho is not None:
        rho = float(rho)
        corrected = photon.background_correct(fit.g2_zero, rho)
        payload["rho"] = rho
        payload["g2_zero_corrected"] = corrected
    _write_json(out_dir, "g2fit.json", payload)

    from .plotting import save_g2_svg
    save_g2_svg(Path(out_dir) / "g2.svg", curve, fit, corrected)
    return 0


def cmd_implant(args, cfg, out_dir, seed):
    ion_cfg = cfg.get("ion", {})
    ion = Particle(z=int(_pick(args.ion_z, ion_cfg, "z", 82)),
                   mass_amu=float(_pick(args.ion_mass_amu, ion_cfg, "mass_amu", 207.2)))
    target_cfg = _pick(args.target, cfg, "target", "diamond")
    if isinstance(target_cfg, str):
        if target_cfg not in TARGET_PRESETS:
            raise ValidationError(
                f"unknown target preset {target_cfg!r}; available: "
                f"{', '.join(sorted(TARGET_PRESETS))}")
        target = TARGET_PRESETS[target_cfg]
    else:
        target = TargetMaterial(**target_cfg)

    energy_kev = float(_pick(args.energy_kev, cfg, "energy_kev", 350.0))
    n_ions = int(_pick(args.n_ions, cfg, "n_ions", 2000))
    mode = _pick(args.mode, cfg, "mode", "full_cascade")
    bin_nm = float(_pick(args.bin_nm, cfg, "bin_nm", 2.0))
    dose = float(_pick(args.dose_per_cm2, cfg, "dose_per_cm2", 1e9))
    n_jobs = int(_pick(args.n_jobs, cfg, "n_jobs", 1))
    seed = int(cfg.get("seed", seed))

    result = simulate_implant(ion, target, energy_kev * 1e3, n_ions, seed=seed,
                              mode=mode, n_jobs=n_jobs)
    profile = depth_profile(result, bin_nm=bin_nm, dose_per_cm2=dose)
    _write(out_dir, "profile.csv", profile_to_csv(profile))

    payload = {
        "schema_version": SCHEMA_VERSION,
        "ion": {"z": ion.z, "mass_amu": ion.mass_amu},
        "target": {"z": target.z, "mass_amu": target.mass_amu,
                   "number_density_nm3": target.number_density_nm3,
                   "displacement_energy_ev": target.displacement_energy_ev},
        "energy_kev": energy_kev,
        "n_ions": n_ions,
        "seed": seed,
        "mode": mode,
        "mean_depth_nm": result.mean_depth_nm,
        "straggle_nm": result.straggle_nm,
        "vacancies_per_ion_mean": float(np.mean(result.vacancies_per_ion)),
        "n_backscattered": result.n_backscattered,
        "peak_vacancy_density_cm3": float(np.max(profile.vacancy_density_cm3)),
        "dose_per_cm2": dose,
        "bin_nm": bin_nm,
        "ls_valid": result.ls_valid,
        "accel_mode": ACCEL_MODE,
    }
    _write_json(out_dir, "implant.json", payload)

    from .plotting import save_profile_svg
    save_profile_svg(Path(out_dir) / "profile.svg", profile,
                     f"{energy_kev:g} keV, Z={ion.z} -> diamond ({mode})")
    return 0


def cmd_strain(args, cfg):
    lambda0 = _pick(args.lambda0_nm, cfg, "lambda0_nm", None)
    shift = _pick(args.shift_nm, cfg, "shift_nm", None)
    if lambda0 is None or shift is None:
        raise ValidationError("strain needs lambda0_nm and shift_nm")
    stress_per_thz = float(_pick(args.stress_per_thz_gpa, cfg, "stress_per_thz_gpa", 1.0))
    modulus = float(_pick(args.youngs_modulus_gpa, cfg, "youngs_modulus_gpa", 1000.0))

    dnu = spectral.shift_to_frequency(float(lambda0), float(shift))
    est = spectral.estimate_strain(dnu, stress_per_thz, modulus)
    print(json.dumps({"schema_version": SCHEMA_VERSION,
                      "delta_nu_THz": dnu,
                      "stress_GPa": est.stress_gpa,
                      "strain": est.strain}, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser / dispatch

def build_parser():
    ap = argparse.ArgumentParser(prog="pbvlab",
                                 description="Split-vacancy emitter and implantation toolkit")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--seed", type=int, default=1, help="random seed for simulations")
    ap.add_argument("--config", default=None, help="JSON config file")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("spectrum", help="synthesize an emission spectrum")
    sp.add_argument("--preset", default=None)
    sp.add_argument("--temperature-k", type=float, default=None)
    sp.add_argument("--linewidth-ghz", type=float, default=None)
    sp.add_argument("--grid", default=None, help="lo:hi:step in nm")
    sp.add_argument("--sideband", action="store_true", default=False)

    an = sub.add_parser("analyze", help="fit peaks across a directory of spectra")
    an.add_argument("input_dir", nargs="?", default=None)
    an.add_argument("--regions", default=None, help="region table JSON")
    an.add_argument("--bin-nm", type=float, default=None)
    an.add_argument("--min-separation-nm", type=float, default=None)
    an.add_argument("--prominence-sigma", type=float, default=None)
    an.add_argument("--tol", type=float, default=None)
    an.add_argument("--model", default=None, choices=[None, "lorentzian", "gaussian"])

    g2 = sub.add_parser("g2", help="fit an antibunching histogram")
    g2.add_argument("--input", default=None, help="delay_ns,coincidences CSV")
    g2.add_argument("--rho", type=float, default=None, help="signal fraction S/(S+B)")
    g2.add_argument("--window-ns", type=float, default=None)
    g2.add_argument("--dead-window-ns", type=float, default=None)

    im = sub.add_parser("implant", help="run the implantation Monte Carlo")
    im.add_argument("--ion-z", type=int, default=None)
    im.add_argument("--ion-mass-amu", type=float, default=None)
    im.add_argument("--target", default=None)
    im.add_argument("--energy-kev", type=float, default=None)
    im.add_argument("--n-ions", type=int, default=None)
    im.add_argument("--mode", default=None, choices=[None, "full_cascade", "kinchin_pease"])
    im.add_argument("--bin-nm", type=float, default=None)
    im.add_argument("--dose-per-cm2", type=float, default=None)
    im.add_argument("--n-jobs", type=int, default=None)

    st = sub.add_parser("strain", help="strain estimate from a line shift")
    st.add_argument("--lambda0-nm", type=float, default=None)
    st.add_argument("--shift-nm", type=float, default=None)
    st.add_argument("--stress-per-thz-gpa", type=float, default=None)
    st.add_argument("--youngs-modulus-gpa", type=float, default=None)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = _load_config(args.config, args.subcommand)
        out_dir = Path(args.out)
        if args.subcommand != "strain":
            out_dir.mkdir(parents=True, exist_ok=True)
            _log(out_dir, argv)
        if args.subcommand == "spectrum":
            return cmd_spectrum(args, cfg, out_dir)
        if args.subcommand == "analyze":
            return cmd_analyze(args, cfg, out_dir)
        if args.subcommand == "g2":
            return cmd_g2(args, cfg, out_dir)
        if args.subcommand == "implant":
            return cmd_implant(args, cfg, out_dir, args.seed)
        if args.subcommand == "strain":
            return cmd_strain(args, cfg)
        raise ValidationError(f"unknown subcommand {args.subcommand!r}")
    except (ValidationError, ParseError, DomainError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FitError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except PbvlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
