"""The whole measurement, end to end, at desk scale.

Simulates the standard 44-recording campaign (alternating field-off and
field-on scans up to 440 V, thermal drift, quasi-periodic phase scatter,
Poisson counting noise), fits every recording, forms the drift-cancelling
shift estimator, jointly fits phase and visibility for the coefficient
phi/V0^2 and the speed ratio, and folds in the velocity measurements to
recover the polarizability with its uncertainty budget.

Identical to running the CLI:
    fringelab simulate --config configs/lithium_default.json --out camp --seed 1
    fringelab fit --manifest camp/manifest.json
    fringelab analyze --fits camp/fit_results.json --error-mode scatter-inflated

Run from the repository root:  python3 demos/04_full_campaign.py
"""

from fringelab import (align_campaign, build_shift_points, combine_velocities,
                       extract_polarizability, fit_fixed_ramp, fit_reference,
                       generate_campaign, joint_fit, make_standard_schedule)
from fringelab.io import default_config

cfg = default_config()
K_TRUE = cfg.truth_phase_coeff

print("simulating the 44-recording campaign (seed 1)...")
schedule = make_standard_schedule(cfg.recording, count=cfg.plan.count,
                                  voltage_step=cfg.plan.voltage_step,
                                  dead_time=cfg.plan.dead_time)
recordings = generate_campaign(cfg.recording, cfg.drift, cfg.beam, cfg.geometry,
                               schedule, seed=1, phase_coeff=K_TRUE)

print("fitting: 5-parameter fits for field-off, frozen-ramp fits for field-on...")
fits = {}
for rec in recordings:
    if rec.voltage == 0.0:
        fits[rec.index] = fit_reference(rec)
for rec in recordings:
    if rec.voltage != 0.0:
        ref = fits[rec.index - 1]
        fits[rec.index] = fit_fixed_ramp(rec, ref.b, ref.c)

aligned = align_campaign(fits, schedule, nominal_speed_ratio=cfg.beam.speed_ratio)
points = build_shift_points(aligned, schedule)
print(f"{len(points)} usable voltage points "
      f"(each field-on scan bracketed by two field-off scans)\n")

print(f"{'V0 (V)':>7} {'shift (rad)':>12} {'sigma (mrad)':>13} {'vis. ratio':>11}")
for p in points[::4]:
    print(f"{p.voltage:7.0f} {p.phase_shift:12.4f} {1e3 * p.phase_sigma:13.2f} "
          f"{p.visibility_ratio:11.4f}")

result = joint_fit(points, error_mode="scatter_inflated")
print(f"\njoint fit of both curves (scatter-inflated errors):")
print(f"  phi/V0^2    = {result.phase_coeff:.6e} +- {result.phase_coeff_sigma:.2e} "
      f"rad/V^2   (truth {K_TRUE:.4e})")
print(f"  speed ratio = {result.speed_ratio:.3f} +- {result.speed_ratio_sigma:.3f}   "
      f"(truth {cfg.beam.speed_ratio})")
print(f"  excess per-point phase scatter: "
      f"{1e3 * result.excess_phase_scatter:.1f} mrad "
      f"(the generator injected 33 mrad rms of quasi-periodic wander)")

velocity = combine_velocities(cfg.velocities)
print(f"\nmean velocity from the two measurements: "
      f"{velocity.u:.1f} +- {velocity.sigma:.1f} m/s")

measurement = extract_polarizability(
    result.phase_coeff, result.phase_coeff_sigma, velocity.u, velocity.sigma,
    cfg.geometry, cfg.uncertainty.electrode_length_2a_sigma,
    cfg.uncertainty.gap_sigma, speed_ratio=result.speed_ratio,
    speed_ratio_sigma=result.speed_ratio_sigma)

rel = measurement.alpha_sigma / measurement.alpha
print(f"\npolarizability: ({measurement.alpha * 1e30:.2f} "
      f"+- {measurement.alpha_sigma * 1e30:.2f})e-30 m^3  ({100 * rel:.2f}%)")
print("uncertainty budget (relative):")
for term in measurement.budget:
    bar = "#" * round(400 * term.relative_sigma)
    print(f"  {term.source:22s} {100 * term.relative_sigma:7.4f}%  {bar}")
print("\nThe budget is dominated by the mean-velocity uncertainty, with the")
print("phase measurement contributing far less: exactly the regime the")
print("instrument was designed to reach.")
