"""Does the pipeline know its own error bars?  A pull study.

Repeats the full simulate-fit-analyze chain over an ensemble of seeds and
histograms the pulls (recovered minus true coefficient, divided by the
reported sigma).  Sound estimators with honest error bars give pulls with
zero mean and unit width.  Run once with scatter disabled (counting noise
only, errors as reported) and once with the 33 mrad quasi-periodic scatter
(errors inflated from the campaign's own residuals).

Run from the repository root:  python3 demos/05_pull_validation.py [n_seeds]
"""

import sys

import numpy as np

from fringelab import (align_campaign, build_shift_points, fit_fixed_ramp,
                       fit_reference, generate_campaign, joint_fit,
                       make_standard_schedule)
from fringelab.io import default_config

N = int(sys.argv[1]) if len(sys.argv) > 1 else 12


def run(seed, scatter, error_mode):
    import dataclasses
    cfg = default_config()
    drift = dataclasses.replace(cfg.drift, scatter_enabled=scatter)
    schedule = make_standard_schedule(cfg.recording, count=cfg.plan.count)
    recordings = generate_campaign(cfg.recording, drift, cfg.beam, cfg.geometry,
                                   schedule, seed=seed,
                                   phase_coeff=cfg.truth_phase_coeff)
    fits = {}
    for rec in recordings:
        if rec.voltage == 0.0:
            fits[rec.index] = fit_reference(rec)
    for rec in recordings:
        if rec.voltage != 0.0:
            fits[rec.index] = fit_fixed_ramp(rec, fits[rec.index - 1].b,
                                             fits[rec.index - 1].c)
    aligned = align_campaign(fits, schedule)
    result = joint_fit(build_shift_points(aligned, schedule),
                       error_mode=error_mode)
    return ((result.phase_coeff - cfg.truth_phase_coeff)
            / result.phase_coeff_sigma,
            result.phase_coeff_sigma / result.phase_coeff)


def summarize(label, outcomes):
    pulls = np.array([o[0] for o in outcomes])
    rels = np.array([o[1] for o in outcomes])
    print(f"\n{label} ({len(pulls)} campaigns)")
    print(f"  pull mean {pulls.mean():+.2f}, width {pulls.std():.2f} "
          f"(ideal: 0 and 1)")
    print(f"  median reported sigma_k/k: {100 * np.median(rels):.4f}%")
    edges = np.arange(-3.5, 3.6, 1.0)
    hist, _ = np.histogram(pulls, edges)
    for lo, count in zip(edges[:-1], hist):
        print(f"  [{lo:+.1f}, {lo + 1:+.1f}) {'#' * count}")


print(f"running 2 x {N} campaigns (pass a larger count for smoother histograms)")
summarize("counting noise only, errors as reported",
          [run(seed, scatter=False, error_mode="reported") for seed in range(N)])
summarize("with 33 mrad scatter, scatter-inflated errors",
          [run(seed, scatter=True, error_mode="scatter_inflated")
           for seed in range(N)])
print("\nWith scatter enabled the reported sigma grows by more than an order")
print("of magnitude; the pulls stay centered either way.")
