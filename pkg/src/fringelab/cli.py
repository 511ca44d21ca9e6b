"""Command-line pipeline: simulate, fit, analyze, check, report.

Exit codes: 0 on success, 1 for user errors (bad configuration, missing
files, malformed documents), 2 for numerical failures (fits or the joint
analysis not converging).
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .analysis import (JointFitResult, VelocityMeasurement, align_campaign,
                       build_shift_points, combine_velocities,
                       extract_polarizability, joint_fit)
from .constants import ARGON_MASS_AMU
from .dispersion import VelocityDistribution, dispersion_curve
from .errors import AnalysisError, ConfigError, FitError, FringelabError, QuadratureError
from .fitting import fit_fixed_ramp, fit_reference
from .io import CampaignManifest, LabConfig, load_config, load_manifest
from .physics import (AtomSpecies, BeamModel, CapacitorGeometry, bragg_angle,
                      correction_bounds, effective_length, gap_variance_bound,
                      phase_coefficient, supersonic_velocity,
                      velocity_fraction_change)
from .synthesis import Recording, generate_campaign, make_standard_schedule

VELOCITIES_FORMAT = "fringelab/velocities"

EXIT_OK = 0
EXIT_USER = 1
EXIT_NUMERICAL = 2


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(config_path, out_dir, seed: int, blind: bool) -> int:
    cfg = load_config(config_path)
    schedule = make_standard_schedule(cfg.recording, count=cfg.plan.count,
                                      voltage_step=cfg.plan.voltage_step,
                                      dead_time=cfg.plan.dead_time)
    phase_coeff = cfg.truth_phase_coeff
    if phase_coeff is None:
        phase_coeff = phase_coefficient(cfg.species, cfg.geometry,
                                        cfg.beam.most_probable_velocity_u,
                                        cfg.constants)
    recordings = generate_campaign(cfg.recording, cfg.drift, cfg.beam, cfg.geometry,
                                   schedule, seed, phase_coeff=phase_coeff,
                                   constants=cfg.constants)
    manifest_path = fio.write_campaign(out_dir, cfg, recordings, seed, blind,
                                       phase_coeff)
    print(f"wrote {len(recordings)} recordings and {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _fit_reference_task(args):
    index, counts_path = args
    rec_counts = fio.read_recording_csv(counts_path)
    rec = Recording(index=index, voltage=0.0, start_time=0.0, counts=rec_counts)
    return index, fit_reference(rec)


def cmd_fit(manifest_path, out_path=None, parallel: int = 1) -> int:
    manifest = load_manifest(manifest_path)
    records = {r.index: r for r in manifest.records}
    fits = {}
    failures = {}

    ref_indices = [r.index for r in manifest.records if r.voltage == 0.0]
    if parallel > 1 and len(ref_indices) > 1:
        tasks = [(i, manifest.recording_path(records[i])) for i in ref_indices]
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for (index, _), outcome in zip(tasks, pool.map(_try_reference, tasks)):
                ok, payload = outcome
                if ok:
                    fits[index] = payload
                else:
                    failures[index] = payload
    else:
        for index in ref_indices:
            try:
                fits[index] = fit_reference(manifest.load_recording(records[index]))
            except (FringelabError, ValueError) as exc:
                failures[index] = str(exc)

    for record in manifest.records:
        if record.voltage == 0.0:
            continue
        ref_index = record.index - 1
        if ref_index not in fits:
            failures[record.index] = (
                f"no converged reference fit at index {ref_index} to fix the ramp"
            )
            continue
        ref = fits[ref_index]
        try:
            rec = manifest.load_recording(record)
            fits[record.index] = fit_fixed_ramp(rec, ref.b, ref.c)
        except (FringelabError, ValueError) as exc:
            failures[record.index] = str(exc)

    if out_path is None:
        out_path = Path(manifest_path).parent / "fit_results.json"
    voltages = {r.index: r.voltage for r in manifest.records}
    fio.write_fit_results(out_path, str(manifest_path), fits, failures, voltages)
    print(f"fitted {len(fits)} recordings ({len(failures)} failures) -> {out_path}")
    for index in sorted(failures):
        print(f"  recording {index}: {failures[index]}", file=sys.stderr)
    return EXIT_NUMERICAL if failures else EXIT_OK


def _try_reference(args):
    try:
        _, fit = _fit_reference_task(args)
        return True, fit
    except (FringelabError, ValueError) as exc:
        return False, str(exc)


# ---------------------------------------------------------------------------
# analyze


def _load_velocities(path) -> tuple[list[VelocityMeasurement], list[str] | None]:
    doc = fio.load_json_document(path, VELOCITIES_FORMAT)
    out = []
    for entry in doc.get("velocities", []):
        try:
            out.append(VelocityMeasurement(entry["method"], entry["u_mps"],
                                           entry["sigma_mps"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid velocity entry {entry!r}: {exc}") from None
    use = doc.get("use")
    return out, use


def _shift_table(points, model_eff, model_ratio):
    rows = []
    for p, eff, ratio in zip(points, model_eff, model_ratio):
        rows.append({
            "voltage_V": p.voltage,
            "phase_shift_rad": p.phase_shift,
            "phase_sigma_rad": p.phase_sigma,
            "model_phase_rad": float(eff),
            "phase_residual_rad": p.phase_shift - float(eff),
            "visibility_ratio": p.visibility_ratio,
            "visibility_sigma": p.visibility_sigma,
            "model_visibility_ratio": float(ratio),
            "visibility_residual": p.visibility_ratio - float(ratio),
        })
    return rows


def _write_curve_csvs(out_dir: Path, rows) -> None:
    phase_lines = ["voltage_V,phase_shift_rad,phase_sigma_rad,model_phase_rad,residual_rad"]
    vis_lines = ["voltage_V,visibility_ratio,visibility_sigma,model_ratio,residual"]
    for r in rows:
        phase_lines.append(
            f"{r['voltage_V']!r},{r['phase_shift_rad']!r},{r['phase_sigma_rad']!r},"
            f"{r['model_phase_rad']!r},{r['phase_residual_rad']!r}")
        vis_lines.append(
            f"{r['voltage_V']!r},{r['visibility_ratio']!r},{r['visibility_sigma']!r},"
            f"{r['model_visibility_ratio']!r},{r['visibility_residual']!r}")
    (out_dir / "phase_shifts.csv").write_text("\n".join(phase_lines) + "\n")
    (out_dir / "visibility_ratio.csv").write_text("\n".join(vis_lines) + "\n")


def _physics_checks(cfg: LabConfig, u: float, vmax: float) -> dict:
    geom = cfg.geometry
    L = effective_length(geom)
    bounds = correction_bounds(geom)
    coeff = phase_coefficient(cfg.species, geom, u, cfg.constants)
    phi_max = coeff * vmax**2
    return {
        "effective_length_m": L,
        "exp_correction": bounds.exp_correction,
        "offset_correction_bound": bounds.offset_correction,
        "gap_variance_bound": gap_variance_bound(geom),
        "phase_coefficient_rad_per_V2": coeff,
        "max_voltage_V": vmax,
        "phase_at_max_voltage_rad": phi_max,
        "delta_v_over_v_at_max_voltage": velocity_fraction_change(
            cfg.species, u, L, phi_max, cfg.constants),
        "bragg_angle_rad": bragg_angle(cfg.species, u, cfg.laser_wavelength,
                                       cfg.constants),
        "supersonic_u_mps": supersonic_velocity(
            cfg.source.nozzle_temperature, cfg.source.carrier_mass,
            cfg.source.slip_fraction, cfg.constants),
    }


def _recompute_alpha(report: dict) -> float:
    """Self-consistency: recompute alpha from the report's own inputs."""
    geo = report["inputs"]["geometry"]
    geom = CapacitorGeometry(half_length_a=geo["half_length_a_m"],
                             mean_gap_h=geo["mean_gap_h_m"],
                             septum_offset_x=geo["septum_offset_x_m"],
                             gap_variance=geo["gap_variance_m2"])
    cons = report["inputs"]["constants"]
    L = effective_length(geom)
    return (report["joint_fit"]["phase_coeff_rad_per_V2"] * cons["hbar"]
            * report["velocity"]["combined"]["u_mps"] * geom.mean_gap_h**2
            / (2.0 * math.pi * cons["epsilon0"] * L))


def analyze_manifest(manifest: CampaignManifest, fits, *,
                     velocities=None, velocity_subset=None,
                     error_mode: str = "reported",
                     visibility_reference: str = "bracket") -> tuple[dict, JointFitResult]:
    """Full campaign analysis; returns (report document, joint-fit result)."""
    cfg = manifest.config
    schedule = manifest.schedule()
    aligned = align_campaign(fits, schedule,
                             nominal_speed_ratio=cfg.beam.speed_ratio)
    global_vis = cfg.recording.base_visibility if visibility_reference == "global" else None
    points = build_shift_points(aligned, schedule, global_visibility=global_vis)
    joint = joint_fit(points, error_mode=error_mode)

    if velocities is None:
        velocities = cfg.velocities
    if not velocities:
        raise AnalysisError("no velocity measurements available; provide a velocity file")
    combined = combine_velocities(velocities, use=velocity_subset)

    result = extract_polarizability(
        joint.phase_coeff, joint.phase_coeff_sigma,
        combined.u, combined.sigma,
        cfg.geometry,
        cfg.uncertainty.electrode_length_2a_sigma,
        cfg.uncertainty.gap_sigma,
        speed_ratio=joint.speed_ratio,
        speed_ratio_sigma=joint.speed_ratio_sigma,
        constants=cfg.constants,
    )

    dist = VelocityDistribution(u=1.0, speed_ratio=joint.speed_ratio)
    volts = np.array([p.voltage for p in points])
    model_eff, model_ratio = dispersion_curve(joint.phase_coeff * volts**2, dist)
    rows = _shift_table(points, model_eff, model_ratio)

    vmax = max(e.voltage for e in schedule)
    report = {
        "format": fio.REPORT_FORMAT,
        "version": fio.FORMAT_VERSION,
        "provenance": {
            "tool_version": __version__,
            "config_sha256": fio.config_sha256(cfg),
            "generated_at": _utc_now(),
            "blind": manifest.blind,
            "seed": manifest.seed,
        },
        "inputs": {
            "constants": fio.config_to_dict(cfg)["constants"],
            "geometry": fio.config_to_dict(cfg)["geometry"],
            "uncertainty": fio.config_to_dict(cfg)["uncertainty"],
        },
        "velocity": {
            "measurements": [{"method": v.method, "u_mps": v.u, "sigma_mps": v.sigma}
                             for v in velocities],
            "combined": {"method": combined.method, "u_mps": combined.u,
                         "sigma_mps": combined.sigma},
        },
        "joint_fit": {
            "phase_coeff_rad_per_V2": joint.phase_coeff,
            "phase_coeff_sigma_rad_per_V2": joint.phase_coeff_sigma,
            "speed_ratio": joint.speed_ratio,
            "speed_ratio_sigma": joint.speed_ratio_sigma,
            "chi2": joint.chi2,
            "dof": joint.dof,
            "error_mode": joint.error_mode,
            "excess_phase_scatter_rad": joint.excess_phase_scatter,
            "n_points": joint.n_points,
            "visibility_reference": visibility_reference,
        },
        "shift_points": rows,
        "polarizability": {
            "alpha_m3": result.alpha,
            "alpha_sigma_m3": result.alpha_sigma,
            "relative_sigma": result.alpha_sigma / result.alpha,
            "budget": [{"source": t.source, "relative_sigma": t.relative_sigma}
                       for t in result.budget],
        },
        "checks": _physics_checks(cfg, combined.u, vmax),
        "fits": [
            {"index": i, "fixed_ramp": f.fixed_ramp, "mean_phase_rad": f.mean_phase,
             "mean_phase_sigma_rad": f.mean_phase_sigma, "visibility": f.visibility,
             "chi2_reduced": f.chi2_reduced, "branch_ambiguous": f.branch_ambiguous}
            for i, f in sorted(aligned.items())
        ],
    }
    if not manifest.blind and manifest.phase_coeff is not None:
        k_true = manifest.phase_coeff
        report["truth"] = {
            "phase_coeff_rad_per_V2": k_true,
            "phase_coeff_pull": (joint.phase_coeff - k_true) / joint.phase_coeff_sigma,
            "speed_ratio": cfg.beam.speed_ratio,
        }

    alpha_check = _recompute_alpha(report)
    if not math.isclose(alpha_check, result.alpha, rel_tol=1e-12):
        raise AnalysisError(
            "report self-consistency failed: alpha not recomputable from its inputs"
        )
    return report, joint


def cmd_analyze(fits_path, manifest_path=None, velocity_file=None, out_dir=None,
                error_mode: str = "reported",
                visibility_reference: str = "bracket") -> int:
    recorded_manifest, fits, failures = fio.load_fit_results(fits_path)
    if manifest_path is None:
        manifest_path = recorded_manifest
    if not manifest_path:
        raise ConfigError("fit results carry no manifest path; pass --manifest")
    manifest = load_manifest(manifest_path)
    velocities = subset = None
    if velocity_file is not None:
        velocities, subset = _load_velocities(velocity_file)
    report, joint = analyze_manifest(manifest, fits, velocities=velocities,
                                     velocity_subset=subset, error_mode=error_mode,
                                     visibility_reference=visibility_reference)
    if failures:
        report["fit_failures"] = {str(k): v for k, v in sorted(failures.items())}

    out_dir = Path(out_dir) if out_dir is not None else Path(fits_path).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    fio.write_json_document(out_dir / "report.json", report)
    _write_curve_csvs(out_dir, report["shift_points"])

    pol = report["polarizability"]
    print(f"phase coefficient: {joint.phase_coeff:.6e} "
          f"+- {joint.phase_coeff_sigma:.2e} rad/V^2")
    print(f"speed ratio:       {joint.speed_ratio:.3f} +- {joint.speed_ratio_sigma:.3f}")
    print(f"mean velocity:     {report['velocity']['combined']['u_mps']:.2f} "
          f"+- {report['velocity']['combined']['sigma_mps']:.2f} m/s")
    print(f"polarizability:    {pol['alpha_m3']:.4e} +- {pol['alpha_sigma_m3']:.2e} m^3 "
          f"({100*pol['relative_sigma']:.3f}%)")
    print(f"report -> {out_dir / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check


def cmd_check(config_path, alpha=None, vmax: float = 450.0) -> int:
    cfg = load_config(config_path)
    if alpha is not None:
        species = AtomSpecies(cfg.species.name, cfg.species.mass, alpha)
        cfg.species = species
        cfg.beam = BeamModel(cfg.beam.most_probable_velocity_u,
                             cfg.beam.speed_ratio, species)
    u = cfg.beam.most_probable_velocity_u
    checks = _physics_checks(cfg, u, vmax)
    print(f"effective length:      {checks['effective_length_m']*1e3:.4f} mm")
    print(f"exp fringing bound:    {checks['exp_correction']:.3e} (relative)")
    print(f"offset (x/h)^2 bound:  {checks['offset_correction_bound']:.3e} (relative)")
    print(f"gap variance bound:    {checks['gap_variance_bound']:.3e} (relative)")
    print(f"phase coefficient:     {checks['phase_coefficient_rad_per_V2']:.6e} rad/V^2 "
          f"(alpha = {cfg.species.polarizability:.4e} m^3)")
    print(f"phase at {vmax:.0f} V:       {checks['phase_at_max_voltage_rad']:.3f} rad")
    print(f"delta v/v at {vmax:.0f} V:   {checks['delta_v_over_v_at_max_voltage']:.3e}")
    print(f"Bragg angle at u:      {checks['bragg_angle_rad']*1e6:.3f} urad "
          f"(lambda = {cfg.laser_wavelength*1e9:.1f} nm)")
    print(f"supersonic check:      {checks['supersonic_u_mps']:.1f} m/s "
          f"(T0 = {cfg.source.nozzle_temperature:.0f} K, "
          f"carrier mass = {cfg.source.carrier_mass/cfg.constants.amu:.3f} u, "
          f"standard Ar = {ARGON_MASS_AMU} u)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(report_path) -> int:
    doc = fio.load_json_document(report_path, fio.REPORT_FORMAT)
    prov = doc.get("provenance", {})
    print(f"fringelab report (tool {prov.get('tool_version')}, "
          f"config {str(prov.get('config_sha256'))[:12]}..., seed {prov.get('seed')})")
    jf = doc.get("joint_fit", {})
    print(f"  phase coefficient: {jf.get('phase_coeff_rad_per_V2'):.6e} "
          f"+- {jf.get('phase_coeff_sigma_rad_per_V2'):.2e} rad/V^2 "
          f"[{jf.get('error_mode')}]")
    print(f"  speed ratio:       {jf.get('speed_ratio'):.3f} "
          f"+- {jf.get('speed_ratio_sigma'):.3f}")
    print(f"  chi2/dof:          {jf.get('chi2'):.1f}/{jf.get('dof')}")
    if jf.get("excess_phase_scatter_rad"):
        print(f"  excess scatter:    {1e3 * jf['excess_phase_scatter_rad']:.1f} mrad "
              f"per point (estimated from residuals)")
    vel = doc.get("velocity", {}).get("combined", {})
    print(f"  mean velocity:     {vel.get('u_mps'):.2f} +- {vel.get('sigma_mps'):.2f} m/s")
    pol = doc.get("polarizability", {})
    print(f"  polarizability:    {pol.get('alpha_m3'):.4e} "
          f"+- {pol.get('alpha_sigma_m3'):.2e} m^3 "
          f"({100*pol.get('relative_sigma', 0):.3f}%)")
    print("  uncertainty budget (relative):")
    for term in pol.get("budget", []):
        print(f"    {term['source']:<22s} {100*term['relative_sigma']:.4f}%")
    if "truth" in doc:
        t = doc["truth"]
        print(f"  truth: k = {t['phase_coeff_rad_per_V2']:.6e} rad/V^2, "
              f"pull = {t['phase_coeff_pull']:+.2f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fringelab",
        description="Simulate, fit, and analyze septum-capacitor interferometer campaigns.",
    )
    parser.add_argument("--version", action="version", version=f"fringelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic campaign")
    p.add_argument("--config", required=True, help="configuration JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="campaign seed (default 0)")
    p.add_argument("--blind", action="store_true",
                   help="omit truth blocks from the manifest")

    p = sub.add_parser("fit", help="fit every recording of a campaign")
    p.add_argument("--manifest", required=True, help="campaign manifest JSON")
    p.add_argument("--out", default=None, help="fit-results JSON path")
    p.add_argument("--parallel", type=int, default=1, metavar="N",
                   help="fit reference recordings with N processes")

    p = sub.add_parser("analyze", help="campaign-level analysis and report")
    p.add_argument("--fits", required=True, help="fit-results JSON")
    p.add_argument("--manifest", default=None,
                   help="campaign manifest (default: recorded in fit results)")
    p.add_argument("--velocity-file", default=None,
                   help="velocity measurements JSON (default: from the config)")
    p.add_argument("--out", default=None, help="report output directory")
    p.add_argument("--error-mode", choices=["reported", "scatter-inflated"],
                   default="reported")
    p.add_argument("--visibility-reference", choices=["bracket", "global"],
                   default="bracket")

    p = sub.add_parser("check", help="geometry and physics sanity report")
    p.add_argument("--config", required=True)
    p.add_argument("--alpha", type=float, default=None,
                   help="override the species polarizability (m^3)")
    p.add_argument("--vmax", type=float, default=450.0,
                   help="operating voltage for the phase and velocity checks")

    p = sub.add_parser("report", help="pretty-print an analysis report")
    p.add_argument("--report", required=True, help="report JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.seed, args.blind)
        if args.command == "fit":
            return cmd_fit(args.manifest, args.out, args.parallel)
        if args.command == "analyze":
            return cmd_analyze(args.fits, args.manifest, args.velocity_file, args.out,
                               error_mode=args.error_mode.replace("-", "_"),
                               visibility_reference=args.visibility_reference)
        if args.command == "check":
            return cmd_check(args.config, args.alpha, args.vmax)
        if args.command == "report":
            return cmd_report(args.report)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (FitError, QuadratureError, AnalysisError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
