"""Campaign-level estimation.

From a campaign of per-recording fits this module forms the drift-cancelling
phase-shift estimator (each field-on mean phase minus the average of its two
field-off neighbours), resolves 2*pi branches across the voltage ladder,
jointly fits phase and visibility curves for the phase-per-volt-squared
coefficient and the parallel speed ratio, combines independent velocity
measurements, and inverts the phase coefficient into a polarizability with a
propagated uncertainty budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .constants import CODATA2018, PhysicalConstants
from .dispersion import VelocityDistribution, dispersion_curve, second_order_approximation
from .errors import AnalysisError
from .fitting import FringeFit, phase_branch_align
from .physics import CapacitorGeometry, effective_length
from .synthesis import VoltageSchedule

__all__ = [
    "ShiftPoint",
    "VelocityMeasurement",
    "BudgetTerm",
    "MeasurementResult",
    "JointFitResult",
    "phase_shift_estimator",
    "combine_velocities",
    "align_campaign",
    "build_shift_points",
    "joint_fit",
    "extract_polarizability",
]


@dataclass(frozen=True)
class ShiftPoint:
    """One voltage point of the phase-shift and visibility-ratio curves."""

    voltage: float
    phase_shift: float
    phase_sigma: float
    visibility_ratio: float
    visibility_sigma: float

    def __post_init__(self):
        if not self.phase_sigma > 0.0:
            raise ValueError("phase sigma must be positive")
        if self.visibility_ratio < 0.0:
            raise ValueError("visibility ratio must be nonnegative")


@dataclass(frozen=True)
class VelocityMeasurement:
    """An independent determination of the mean beam velocity."""

    method: str
    u: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("velocity sigma must be positive")


@dataclass(frozen=True)
class BudgetTerm:
    """One contribution to the relative polarizability uncertainty."""

    source: str
    relative_sigma: float


@dataclass
class MeasurementResult:
    """Final polarizability measurement with its uncertainty budget.

    The budget lists the relative-sigma contributions whose quadrature sum
    equals ``alpha_sigma / alpha`` exactly.
    """

    phase_coeff: float
    phase_coeff_sigma: float
    u: float
    u_sigma: float
    alpha: float
    alpha_sigma: float
    budget: list[BudgetTerm] = field(default_factory=list)
    speed_ratio: float | None = None
    speed_ratio_sigma: float | None = None


@dataclass
class JointFitResult:
    """Two-parameter fit of the phase and visibility curves.

    ``excess_phase_scatter`` is the per-point phase noise (rad, rms) added in
    quadrature to the reported sigmas in ``scatter_inflated`` mode; zero when
    the reported errors already account for the residuals.
    """

    phase_coeff: float
    phase_coeff_sigma: float
    speed_ratio: float
    speed_ratio_sigma: float
    covariance: np.ndarray
    chi2: float
    dof: int
    error_mode: str
    n_points: int
    excess_phase_scatter: float = 0.0

    @property
    def chi2_reduced(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.nan


def phase_shift_estimator(prev: FringeFit, on: FringeFit, next_: FringeFit, *,
                          voltage: float = 0.0,
                          times: tuple[float, float, float] | None = None,
                          global_visibility: float | None = None) -> ShiftPoint:
    """Drift-cancelling estimate of the field-on phase shift.

    ``shift = <psi_on> - (<psi_prev> + <psi_next>)/2`` with the two
    field-off neighbours bracketing the field-on recording in time; any
    phase drift linear in time cancels exactly for equally spaced
    recordings.  The sigma follows from independent errors:
    ``sigma^2 = sigma_on^2 + (sigma_prev^2 + sigma_next^2)/4``.

    The visibility ratio divides the field-on visibility by the field-off
    visibility interpolated between the brackets at the field-on time
    (plain average when ``times`` is omitted), or by ``global_visibility``
    when given.
    """
    if prev.fixed_ramp or next_.fixed_ramp:
        raise AnalysisError("bracketing fits must be field-off reference fits")
    shift = on.mean_phase - 0.5 * (prev.mean_phase + next_.mean_phase)
    sigma = math.sqrt(on.mean_phase_sigma**2
                      + 0.25 * (prev.mean_phase_sigma**2 + next_.mean_phase_sigma**2))

    if global_visibility is not None:
        v_ref = global_visibility
        var_ref = 0.0
    else:
        if times is not None:
            t_prev, t_on, t_next = times
            if not t_prev < t_on < t_next:
                raise AnalysisError("bracket times must straddle the field-on recording")
            w = (t_next - t_on) / (t_next - t_prev)
        else:
            w = 0.5
        v_ref = w * prev.visibility + (1.0 - w) * next_.visibility
        var_ref = (w * prev.visibility_sigma)**2 + ((1.0 - w) * next_.visibility_sigma)**2
    ratio = on.visibility / v_ref
    ratio_var = (on.visibility_sigma / v_ref)**2 + (on.visibility / v_ref**2)**2 * var_ref
    return ShiftPoint(voltage=voltage, phase_shift=shift, phase_sigma=sigma,
                      visibility_ratio=ratio, visibility_sigma=math.sqrt(ratio_var))


def combine_velocities(measurements: list[VelocityMeasurement],
                       use: list[str] | None = None) -> VelocityMeasurement:
    """Inverse-variance weighted mean of independent velocity measurements.

    By default every method except ``supersonic`` participates (the
    supersonic-expansion prediction serves only as a consistency check).
    """
    if use is None:
        subset = [m for m in measurements if m.method != "supersonic"]
    else:
        subset = [m for m in measurements if m.method in use]
    if not subset:
        raise ValueError("no velocity measurements in the requested subset")
    weights = np.array([1.0 / m.sigma**2 for m in subset])
    values = np.array([m.u for m in subset])
    mean = float(np.sum(weights * values) / np.sum(weights))
    sigma = float(1.0 / math.sqrt(np.sum(weights)))
    label = "weighted:" + "+".join(m.method for m in subset)
    return VelocityMeasurement(method=label, u=mean, sigma=sigma)


def _bracket_indices(index: int, fits: dict[int, FringeFit]) -> tuple[int, int] | None:
    lo, hi = index - 1, index + 1
    if lo in fits and hi in fits:
        return lo, hi
    return None


def align_campaign(fits: dict[int, FringeFit], schedule: VoltageSchedule, *,
                   nominal_speed_ratio: float = 8.0) -> dict[int, FringeFit]:
    """Resolve 2*pi branches across a fitted campaign.

    Field-off fits are chained with an expected shift of zero (the drift
    between consecutive recordings is far below pi).  Field-on fits are
    aligned in ascending voltage against the average of their bracketing
    field-off phases, with the expected shift predicted from the
    phase-per-volt-squared coefficient bootstrapped from already-aligned
    points (second-order dispersion model at the nominal speed ratio; the
    prediction only selects the branch, never enters the estimate).

    The bootstrap requires the lowest field-on voltage to produce a true
    shift below pi, as the standard ladder does by a wide margin; points
    whose branch choice is marginal come back flagged ``branch_ambiguous``.
    """
    entries = {e.index: e for e in schedule}
    unknown = sorted(set(fits) - set(entries))
    if unknown:
        raise AnalysisError(f"fits reference indices missing from the schedule: {unknown}")
    aligned: dict[int, FringeFit] = {}

    offs = sorted(i for i in fits if entries[i].voltage == 0.0)
    prev_phase = None
    for i in offs:
        if prev_phase is None:
            aligned[i] = fits[i]
        else:
            aligned[i] = phase_branch_align(fits[i], prev_phase, 0.0)
        prev_phase = aligned[i].mean_phase

    dist = VelocityDistribution(u=1.0, speed_ratio=nominal_speed_ratio)
    ons = sorted((i for i in fits if entries[i].voltage != 0.0),
                 key=lambda i: abs(entries[i].voltage))
    k_num = k_den = 0.0
    for i in ons:
        bracket = _bracket_indices(i, aligned)
        if bracket is None:
            aligned[i] = fits[i]  # unusable without both neighbours; leave raw
            continue
        ref = 0.5 * (aligned[bracket[0]].mean_phase + aligned[bracket[1]].mean_phase)
        v2 = entries[i].voltage**2
        expected = 0.0
        if k_den > 0.0:
            expected = second_order_approximation((k_num / k_den) * v2, dist).effective_phase
        aligned[i] = phase_branch_align(fits[i], ref, expected)
        shift = aligned[i].mean_phase - ref
        # Invert the dispersion correction approximately to update the
        # bootstrap coefficient; errors here are second order and only
        # ever influence branch selection.
        corr = 1.0
        if shift != 0.0:
            corr = second_order_approximation(shift, dist).effective_phase / shift
        k_est = shift / (v2 * corr)
        w = v2 * v2 / aligned[i].mean_phase_sigma**2
        k_num += w * k_est
        k_den += w
    return aligned


def build_shift_points(fits: dict[int, FringeFit], schedule: VoltageSchedule, *,
                       global_visibility: float | None = None) -> list[ShiftPoint]:
    """Shift points for every field-on fit with both field-off neighbours.

    ``fits`` must already be branch-aligned (see :func:`align_campaign`).
    """
    entries = {e.index: e for e in schedule}
    points = []
    for i in sorted(fits):
        if entries[i].voltage == 0.0:
            continue
        bracket = _bracket_indices(i, fits)
        if bracket is None:
            continue
        lo, hi = bracket
        points.append(phase_shift_estimator(
            fits[lo], fits[i], fits[hi],
            voltage=entries[i].voltage,
            times=(entries[lo].start_time, entries[i].start_time, entries[hi].start_time),
            global_visibility=global_visibility,
        ))
    if not points:
        raise AnalysisError("no field-on recording has both field-off neighbours")
    return sorted(points, key=lambda p: p.voltage)


def _excess_scatter(residuals: np.ndarray, sigmas: np.ndarray) -> float:
    """Per-point rms noise s with sum(r^2/(sigma^2+s^2)) = N-1 (0 if none needed).

    Solves the usual excess-variance condition by bisection; the left side is
    monotone decreasing in s.
    """
    n = residuals.size
    target = n - 1.0
    if np.sum(residuals**2 / sigmas**2) <= target:
        return 0.0
    lo, hi = 0.0, float(np.max(np.abs(residuals))) * 2.0 + 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(residuals**2 / (sigmas**2 + mid**2)) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def joint_fit(points: list[ShiftPoint], *,
              include_v3_prefactor: bool = False,
              error_mode: str = "reported",
              n_nodes: int | None = None) -> JointFitResult:
    """Joint two-parameter fit of the phase and visibility curves.

    The model predicts the dispersed effective phase and visibility ratio at
    each voltage from ``phi_m = k*V**2`` and the speed ratio S; phase and
    visibility residuals are each weighted by their own sigma and fitted
    together.  ``error_mode='reported'`` takes the per-point sigmas at face
    value.  ``'scatter_inflated'`` estimates the excess per-point phase
    noise from the first pass (the quasi-periodic mean-phase scatter is
    phase noise, so only phase sigmas are inflated) and refits with the
    inflated weights, so both the sigmas and the relative point weights
    reflect the scatter.
    """
    if error_mode not in ("reported", "scatter_inflated"):
        raise ValueError(f"unknown error mode {error_mode!r}")
    voltages = np.array([p.voltage for p in points])
    if len(points) < 3 or len(np.unique(voltages)) < 3:
        raise AnalysisError("joint fit needs at least 3 points at distinct voltages")
    phase = np.array([p.phase_shift for p in points])
    s_phase = np.array([p.phase_sigma for p in points])
    ratio = np.array([p.visibility_ratio for p in points])
    s_ratio = np.array([p.visibility_sigma for p in points])
    if np.any(s_ratio <= 0.0):
        raise AnalysisError("visibility sigmas must be positive for the joint fit")
    v2 = voltages**2

    w = v2**2 / s_phase**2
    k0 = float(np.sum(w * phase / v2) / np.sum(w)) if np.sum(w) > 0 else 0.0
    if k0 <= 0.0:
        k0 = max(float(np.max(np.abs(phase)) / np.max(v2)), 1e-12)
    if np.max(np.abs(k0 * v2)) < 0.1:
        raise AnalysisError(
            "speed ratio unidentifiable: all predicted phases below 0.1 rad"
        )
    i_min = int(np.argmin(ratio))
    if ratio[i_min] < 0.9:
        s0 = abs(k0) * v2[i_min] / (2.0 * math.sqrt(-math.log(max(ratio[i_min], 1e-6))))
        s0 = float(np.clip(s0, 1.5, 100.0))
    else:
        s0 = 8.0

    def solve(sig_phase):
        def residuals(x):
            k, s = x
            dist = VelocityDistribution(u=1.0, speed_ratio=s,
                                        include_v3_prefactor=include_v3_prefactor)
            eff, vis = dispersion_curve(k * v2, dist, n_nodes)
            return np.concatenate(((phase - eff) / sig_phase, (ratio - vis) / s_ratio))

        res = least_squares(residuals, x0=np.array([k0, s0]),
                            bounds=([1e-16, 1.0 + 1e-9], [np.inf, 1e7]),
                            x_scale=[abs(k0), max(s0, 1.0)],
                            ftol=1e-12, xtol=1e-12, gtol=1e-12, method="trf")
        if not res.success:
            raise AnalysisError(f"joint fit did not converge: {res.message}")
        return res

    res = solve(s_phase)
    excess = 0.0
    if error_mode == "scatter_inflated":
        k, s = res.x
        dist = VelocityDistribution(u=1.0, speed_ratio=float(s),
                                    include_v3_prefactor=include_v3_prefactor)
        eff, _ = dispersion_curve(float(k) * v2, dist, n_nodes)
        excess = _excess_scatter(phase - eff, s_phase)
        if excess > 0.0:
            res = solve(np.sqrt(s_phase**2 + excess**2))
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError("joint fit covariance is singular") from exc
    chi2 = float(2.0 * res.cost)
    dof = 2 * len(points) - 2
    k, s = (float(t) for t in res.x)
    return JointFitResult(
        phase_coeff=k, phase_coeff_sigma=math.sqrt(cov[0, 0]),
        speed_ratio=s, speed_ratio_sigma=math.sqrt(cov[1, 1]),
        covariance=cov, chi2=chi2, dof=dof, error_mode=error_mode,
        n_points=len(points), excess_phase_scatter=excess,
    )


def extract_polarizability(phase_coeff: float, phase_coeff_sigma: float,
                           u: float, u_sigma: float,
                           geom: CapacitorGeometry,
                           electrode_length_2a_sigma: float,
                           gap_sigma: float, *,
                           speed_ratio: float | None = None,
                           speed_ratio_sigma: float | None = None,
                           constants: PhysicalConstants = CODATA2018) -> MeasurementResult:
    """Invert the phase coefficient into a volume polarizability (m^3).

    ``alpha = k * hbar * u * <h>**2 / (2*pi*epsilon0 * L_eff)``.  The
    relative sigma adds in quadrature the contributions of the coefficient,
    the mean velocity, the electrode length 2a (through L_eff) and the gap
    <h>.  The gap enters both the numerator and L_eff, so its sensitivity is
    computed from the full expression: ``d(ln alpha)/dh = 2/h + (2/pi)/L_eff``.
    """
    L = effective_length(geom)
    h = geom.mean_gap_h
    alpha = (phase_coeff * constants.hbar * u * h**2
             / (2.0 * math.pi * constants.epsilon0 * L))
    terms = [
        BudgetTerm("phase_coefficient", abs(phase_coeff_sigma / phase_coeff)),
        BudgetTerm("mean_velocity_u", abs(u_sigma / u)),
        BudgetTerm("electrode_length_2a", abs(electrode_length_2a_sigma / L)),
        BudgetTerm("gap_h", abs((2.0 / h + (2.0 / math.pi) / L) * gap_sigma)),
    ]
    terms.sort(key=lambda t: t.relative_sigma, reverse=True)
    rel = math.sqrt(sum(t.relative_sigma**2 for t in terms))
    return MeasurementResult(
        phase_coeff=phase_coeff, phase_coeff_sigma=phase_coeff_sigma,
        u=u, u_sigma=u_sigma,
        alpha=alpha, alpha_sigma=alpha * rel, budget=terms,
        speed_ratio=speed_ratio, speed_ratio_sigma=speed_ratio_sigma,
    )
