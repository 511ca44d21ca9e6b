"""Velocity dispersion: why the fringes fade as the voltage rises.

The polarizability phase goes as 1/v, so atoms of different speeds arrive
with different phases and the ensemble-averaged fringe loses contrast.
This script traces the visibility ratio and the effective phase across the
full voltage ladder, compares the exact numerical average with the
second-order closed form, and writes plot-ready CSV (plus a PNG when
matplotlib is importable).

Run from the repository root:  python3 demos/02_velocity_dispersion.py
"""

from pathlib import Path

import numpy as np

from fringelab import (VelocityDistribution, dispersion_curve,
                       second_order_approximation)

K = 1.3870e-4   # rad/V^2
S = 8.0         # parallel speed ratio
OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

dist = VelocityDistribution(u=1065.7, speed_ratio=S)
voltages = np.arange(0.0, 451.0, 10.0)
phi_m = K * voltages**2
eff, ratio = dispersion_curve(phi_m, dist)

print(f"speed ratio S = {S}: contrast and phase vs applied voltage")
print(f"{'V0 (V)':>7} {'phi_m (rad)':>12} {'eff. phase':>11} {'ratio':>7}")
for i in range(0, len(voltages), 5):
    print(f"{voltages[i]:7.0f} {phi_m[i]:12.3f} {eff[i]:11.3f} {ratio[i]:7.4f}")

print("\nsecond-order closed form vs exact integral (worst over the ladder):")
worst_r = worst_p = 0.0
for p in phi_m:
    approx = second_order_approximation(float(p), dist)
    j = np.searchsorted(phi_m, p)
    worst_r = max(worst_r, abs(approx.visibility_ratio - ratio[j]))
    worst_p = max(worst_p, abs(approx.effective_phase - eff[j]))
print(f"  |d ratio| <= {worst_r:.4f}, |d phase| <= {1e3 * worst_p:.2f} mrad")
print("Good enough to sanity-check the integral, not good enough to fit with.")

csv = OUT / "dispersion_curves.csv"
header = "voltage_V,phi_m_rad,effective_phase_rad,visibility_ratio"
rows = [f"{v!r},{p!r},{e!r},{r!r}"
        for v, p, e, r in zip(voltages, phi_m, eff, ratio)]
csv.write_text(header + "\n" + "\n".join(rows) + "\n")
print(f"\nwrote {csv}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; skipping the PNG")
else:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
    ax1.plot(voltages, eff, "-", color="tab:blue")
    ax1.set_ylabel("effective phase shift (rad)")
    ax2.plot(voltages, ratio, "-", color="tab:red")
    ax2.set_xlabel("applied voltage (V)")
    ax2.set_ylabel("visibility ratio")
    for s_alt, style in ((5.0, ":"), (12.0, "--")):
        d = VelocityDistribution(u=1065.7, speed_ratio=s_alt)
        e2, r2 = dispersion_curve(phi_m, d)
        ax2.plot(voltages, r2, style, color="gray", label=f"S = {s_alt:.0f}")
    ax2.legend()
    fig.tight_layout()
    png = OUT / "dispersion_curves.png"
    fig.savefig(png, dpi=120)
    print(f"wrote {png}")
