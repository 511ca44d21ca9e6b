"""Per-recording fringe fits.

Each recording is fitted to ``I(n) = I0 * (1 + V * cos(a + b*n + c*n**2))``
by weighted nonlinear least squares with Poisson weights
(variance = max(counts, 1)).  Field-off recordings are fitted with all five
parameters free (:func:`fit_reference`); field-on recordings are fitted with
the ramp coefficients b and c frozen to the values of the preceding
field-off fit (:func:`fit_fixed_ramp`), which removes the ramp's freedom
from the phase comparison.

The phase observable is the channel-averaged mean phase
``<psi> = a + b*(N-1)/2 + c*(N-1)(2N-1)/6`` (channels indexed 0..N-1),
with its sigma propagated from the parameter covariance.  Mean phases are
only defined modulo 2*pi by a single fit; :func:`phase_branch_align`
resolves the integer branch against an expected shift.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateFringeError, FitError
from .synthesis import Recording

__all__ = [
    "FringeFit",
    "channel_mean",
    "channel_sq_mean",
    "mean_phase_value",
    "fit_reference",
    "fit_fixed_ramp",
    "phase_branch_align",
]

#: Two branch candidates closer together than this (in distance-to-target
#: difference) are considered ambiguous and flagged for manual resolution.
_BRANCH_AMBIGUITY = 0.5

_TWO_PI = 2.0 * math.pi


def channel_mean(n_channels: int) -> float:
    """Mean of the channel index n over 0..N-1."""
    return (n_channels - 1) / 2.0


def channel_sq_mean(n_channels: int) -> float:
    """Mean of n**2 over 0..N-1: (N-1)(2N-1)/6."""
    return (n_channels - 1) * (2 * n_channels - 1) / 6.0


def mean_phase_value(a: float, b: float, c: float, n_channels: int) -> float:
    """Channel average of the phase polynomial a + b*n + c*n**2."""
    return a + b * channel_mean(n_channels) + c * channel_sq_mean(n_channels)


@dataclass
class FringeFit:
    """Fitted fringe parameters, covariance, and the mean-phase observable.

    ``covariance`` is 5x5 for reference fits (order I0, V, a, b, c) and 3x3
    for fixed-ramp fits (order I0, V, a).  ``residual_chi2`` is the weighted
    sum of squared residuals; ``dof`` the number of channels minus free
    parameters.  ``branch_offset`` counts the 2*pi multiples added by
    branch alignment.
    """

    I0: float
    visibility: float
    a: float
    b: float
    c: float
    covariance: np.ndarray
    mean_phase: float
    mean_phase_sigma: float
    fixed_ramp: bool
    residual_chi2: float
    n_channels: int
    dof: int
    branch_offset: int = 0
    branch_ambiguous: bool = False

    @property
    def chi2_reduced(self) -> float:
        return self.residual_chi2 / self.dof

    @property
    def visibility_sigma(self) -> float:
        return math.sqrt(self.covariance[1, 1])


def _validate_counts(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or counts.size < 5:
        raise ValueError("fit requires a 1-D recording with at least 5 channels")
    if np.ptp(counts) == 0.0:
        raise ValueError("fit requires nonzero count variance")
    return counts


def _initial_guess(counts: np.ndarray) -> tuple[float, float, float, float]:
    """(I0, V, a, b) start values from the dominant discrete frequency.

    b comes from the strongest non-DC bin of the mean-subtracted spectrum
    (parabolic sub-bin refinement), a from the phase of that component, I0
    from the channel mean, V from the smoothed peak-to-peak contrast.
    """
    n = counts.size
    I0 = float(counts.mean())
    spec = np.fft.rfft(counts - I0)
    mag = np.abs(spec)
    k = int(np.argmax(mag[1:]) + 1)
    delta = 0.0
    if 1 <= k < mag.size - 1:
        denom = 2.0 * mag[k] - mag[k - 1] - mag[k + 1]
        if denom > 0.0:
            delta = 0.5 * (mag[k + 1] - mag[k - 1]) / denom
            delta = float(np.clip(delta, -0.5, 0.5))
    b0 = _TWO_PI * (k + delta) / n
    a0 = float(np.angle(spec[k]))
    width = max(3, n // 64)
    kernel = np.ones(width) / width
    smooth = np.convolve(counts, kernel, mode="valid")
    hi, lo = smooth.max(), smooth.min()
    v0 = (hi - lo) / (hi + lo) if hi + lo > 0.0 else 0.1
    return I0, float(np.clip(v0, 0.01, 0.99)), a0, b0


def _run_fit(counts, x0, model, jac, bounds, n_free):
    sigma = np.sqrt(np.maximum(counts, 1.0))

    def residual(x):
        return (counts - model(x)) / sigma

    def jacobian(x):
        return -jac(x) / sigma[:, None]

    res = least_squares(residual, x0, jac=jacobian, bounds=bounds, method="trf",
                        ftol=1e-14, xtol=1e-14, gtol=1e-10)
    if not res.success:
        raise FitError(
            f"fringe fit did not converge: {res.message}",
            diagnostics={"status": res.status, "message": res.message,
                         "optimality": res.optimality, "nfev": res.nfev},
        )
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        raise DegenerateFringeError(
            "singular fit covariance; visibility consistent with zero",
            diagnostics={"params": list(res.x)},
        ) from None
    vis, vis_sigma = res.x[1], math.sqrt(max(cov[1, 1], 0.0))
    # 5 sigma: a pure-noise spectrum peaks near 3.3 sigma after the
    # maximum over frequencies, while real fringes sit far above.
    if vis < 5.0 * vis_sigma:
        raise DegenerateFringeError(
            f"fitted visibility {vis:.3e} is within 5 sigma ({vis_sigma:.3e}) of zero; "
            "the fringe phase is unreliable",
            diagnostics={"visibility": vis, "visibility_sigma": vis_sigma},
        )
    chi2 = float(2.0 * res.cost)
    return res.x, cov, chi2, counts.size - n_free


def fit_reference(rec: Recording) -> FringeFit:
    """Five-parameter fit of a field-off recording (I0, V, a, b, c all free).

    Raises :class:`FitError` on non-convergence (with solver diagnostics)
    and :class:`DegenerateFringeError` when the fitted visibility is
    consistent with zero.
    """
    counts = _validate_counts(rec.counts)
    n = np.arange(counts.size, dtype=float)
    nsq = n * n

    def model(x):
        I0, v, a, b, c = x
        return I0 * (1.0 + v * np.cos(a + b * n + c * nsq))

    def jac(x):
        I0, v, a, b, c = x
        psi = a + b * n + c * nsq
        cpsi, spsi = np.cos(psi), np.sin(psi)
        d_phase = -I0 * v * spsi
        return np.column_stack([1.0 + v * cpsi, I0 * cpsi,
                                d_phase, d_phase * n, d_phase * nsq])

    I0_0, v0, a0, b0 = _initial_guess(counts)
    x0 = np.array([I0_0, v0, a0, b0, 0.0])
    lb = [1e-12, 0.0, -np.inf, -np.inf, -np.inf]
    ub = [np.inf, 1.0, np.inf, np.inf, np.inf]
    x, cov, chi2, dof = _run_fit(counts, x0, model, jac, (lb, ub), 5)

    I0, v, a, b, c = (float(t) for t in x)
    wrap = _TWO_PI * round(a / _TWO_PI)
    a -= wrap  # keep a in (-pi, pi]; branch alignment restores multiples
    mean = mean_phase_value(a, b, c, counts.size)
    g = np.array([0.0, 0.0, 1.0, channel_mean(counts.size), channel_sq_mean(counts.size)])
    sigma = math.sqrt(g @ cov @ g)
    return FringeFit(I0=I0, visibility=v, a=a, b=b, c=c, covariance=cov,
                     mean_phase=mean, mean_phase_sigma=sigma, fixed_ramp=False,
                     residual_chi2=chi2, n_channels=counts.size, dof=dof)


def fit_fixed_ramp(rec: Recording, b_fixed: float, c_fixed: float) -> FringeFit:
    """Three-parameter fit (I0, V, a) with the ramp frozen to (b_fixed, c_fixed).

    Used for field-on recordings, with the ramp taken from the preceding
    field-off reference fit; the fixed coefficients contribute no variance
    to the mean phase.
    """
    counts = _validate_counts(rec.counts)
    n = np.arange(counts.size, dtype=float)
    theta = b_fixed * n + c_fixed * n * n

    def model(x):
        I0, v, a = x
        return I0 * (1.0 + v * np.cos(a + theta))

    def jac(x):
        I0, v, a = x
        cpsi, spsi = np.cos(a + theta), np.sin(a + theta)
        return np.column_stack([1.0 + v * cpsi, I0 * cpsi, -I0 * v * spsi])

    I0_0 = float(counts.mean())
    z = np.sum((counts - I0_0) * np.exp(-1j * theta))
    a0 = float(np.angle(z))
    width = max(3, counts.size // 64)
    smooth = np.convolve(counts, np.ones(width) / width, mode="valid")
    hi, lo = smooth.max(), smooth.min()
    v0 = float(np.clip((hi - lo) / (hi + lo) if hi + lo > 0 else 0.1, 0.01, 0.99))
    x0 = np.array([I0_0, v0, a0])
    lb = [1e-12, 0.0, -np.inf]
    ub = [np.inf, 1.0, np.inf]
    x, cov, chi2, dof = _run_fit(counts, x0, model, jac, (lb, ub), 3)

    I0, v, a = (float(t) for t in x)
    wrap = _TWO_PI * round(a / _TWO_PI)
    a -= wrap
    mean = mean_phase_value(a, b_fixed, c_fixed, counts.size)
    sigma = math.sqrt(cov[2, 2])
    return FringeFit(I0=I0, visibility=v, a=a, b=b_fixed, c=c_fixed, covariance=cov,
                     mean_phase=mean, mean_phase_sigma=sigma, fixed_ramp=True,
                     residual_chi2=chi2, n_channels=counts.size, dof=dof)


def phase_branch_align(fit: FringeFit, reference_phase: float,
                       expected_shift: float) -> FringeFit:
    """Resolve the 2*pi branch of the mean phase against an expected shift.

    Adds the integer multiple of 2*pi that brings
    ``mean_phase - reference_phase`` closest to ``expected_shift``.  When the
    runner-up branch is nearly as good (candidate distances to the target
    differing by less than 0.5 rad) the result is flagged ambiguous.  The
    constant term a is shifted by the same amount so the mean-phase formula
    stays exact.
    """
    target = reference_phase + expected_shift
    m = round((target - fit.mean_phase) / _TWO_PI)
    aligned = fit.mean_phase + _TWO_PI * m
    d_best = abs(aligned - target)
    d_next = _TWO_PI - d_best
    ambiguous = (d_next - d_best) < _BRANCH_AMBIGUITY
    return dataclasses.replace(
        fit,
        a=fit.a + _TWO_PI * m,
        mean_phase=aligned,
        branch_offset=fit.branch_offset + m,
        branch_ambiguous=fit.branch_ambiguous or ambiguous,
    )
