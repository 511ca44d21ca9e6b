"""Closed-form physics of the septum-capacitor interferometer.

Geometry and beam descriptions plus every analytic relation used by the
pipeline: the effective capacitor length, the field-squared line integral,
the polarizability phase and its per-volt-squared coefficient, the
supersonic-source and Bragg-angle velocity cross-checks, and the fractional
velocity change inside the field region.

All operations are pure functions of their arguments and the supplied
constants set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CODATA2018, LITHIUM7_MASS_AMU, PhysicalConstants

__all__ = [
    "AtomSpecies",
    "CapacitorGeometry",
    "BeamModel",
    "CorrectionBounds",
    "lithium7",
    "effective_length",
    "correction_bounds",
    "gap_variance_bound",
    "field_squared_integral",
    "polarizability_phase",
    "phase_coefficient",
    "supersonic_velocity",
    "bragg_angle",
    "velocity_from_bragg",
    "de_broglie_wavelength",
    "velocity_fraction_change",
]


@dataclass(frozen=True)
class AtomSpecies:
    """An atomic species: mass and static volume polarizability.

    ``polarizability`` is the volume polarizability in m^3 (energy shift
    ``U = -2*pi*epsilon0*alpha*E**2``).
    """

    name: str
    mass: float            # kg
    polarizability: float  # m^3

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ValueError(f"species mass must be positive, got {self.mass!r}")
        if not self.polarizability > 0.0:
            raise ValueError(f"polarizability must be positive, got {self.polarizability!r}")


def lithium7(polarizability: float = 24.33e-30,
             constants: PhysicalConstants = CODATA2018) -> AtomSpecies:
    """Lithium-7 with a configurable volume polarizability (default 24.33e-30 m^3)."""
    return AtomSpecies("7Li", LITHIUM7_MASS_AMU * constants.amu, polarizability)


@dataclass(frozen=True)
class CapacitorGeometry:
    """Guarded septum capacitor geometry.

    The high-voltage electrode extends from ``-half_length_a`` to
    ``+half_length_a`` along the beam; ``mean_gap_h`` is the mean
    septum-to-electrode distance; ``septum_offset_x`` is the atom's distance
    from the septum surface; ``gap_variance`` is the spacer-thickness
    variance ``<(h - <h>)^2>``, kept only for error-bound reporting.
    """

    half_length_a: float        # m
    mean_gap_h: float           # m
    septum_offset_x: float = 0.0  # m
    gap_variance: float = 0.0     # m^2

    def __post_init__(self):
        if not 0.0 < self.mean_gap_h < self.half_length_a:
            raise ValueError(
                f"need 0 < mean_gap_h < half_length_a, got gap {self.mean_gap_h!r}, "
                f"half-length {self.half_length_a!r}"
            )
        if not 0.0 <= self.septum_offset_x < self.mean_gap_h:
            raise ValueError(
                f"need 0 <= septum_offset_x < mean_gap_h, got {self.septum_offset_x!r}"
            )
        if self.gap_variance < 0.0:
            raise ValueError("gap_variance must be nonnegative")


@dataclass(frozen=True)
class BeamModel:
    """Supersonic beam: most probable velocity, parallel speed ratio, species.

    ``speed_ratio`` must exceed 1; the Gaussian velocity distribution without
    the v^3 prefactor assumes a narrow distribution.
    """

    most_probable_velocity_u: float  # m/s
    speed_ratio: float               # dimensionless
    species: AtomSpecies

    def __post_init__(self):
        if not self.most_probable_velocity_u > 0.0:
            raise ValueError("most probable velocity must be positive")
        if not self.speed_ratio > 1.0:
            raise ValueError(f"speed ratio must exceed 1, got {self.speed_ratio!r}")


@dataclass(frozen=True)
class CorrectionBounds:
    """Relative-to-L_eff magnitudes of the neglected capacitor corrections.

    ``exp_correction`` is the exponentially small fringing term
    ``exp(-2*pi*a/<h>)``; ``offset_correction`` is the order bound
    ``(x/<h>)**2`` on the off-septum quadratic term.  Both are reported
    for the error budget and never applied to the effective length.
    """

    exp_correction: float
    offset_correction: float


def effective_length(geom: CapacitorGeometry) -> float:
    """Effective length of the guarded capacitor: ``2a - 2<h>/pi``.

    The ideal-capacitor field V0/<h> over this length reproduces the exact
    line integral of E^2 along the septum, up to the corrections reported by
    :func:`correction_bounds`.
    """
    return 2.0 * geom.half_length_a - 2.0 * geom.mean_gap_h / math.pi


def correction_bounds(geom: CapacitorGeometry) -> CorrectionBounds:
    """Bounds on the two corrections neglected in :func:`effective_length`.

    The off-septum term is known only to be quadratic in the offset x; its
    exact prefactor is not available, so ``(x/<h>)**2`` is reported as an
    order-of-magnitude bound (for x <~ 50 um and <h> ~ 2 mm the true correction is below
    1e-4 of the effective length).
    """
    exp_corr = math.exp(-2.0 * math.pi * geom.half_length_a / geom.mean_gap_h)
    offset_corr = (geom.septum_offset_x / geom.mean_gap_h) ** 2
    return CorrectionBounds(exp_correction=exp_corr, offset_correction=offset_corr)


def gap_variance_bound(geom: CapacitorGeometry) -> float:
    """Relative error of order ``<(h-<h>)^2>/<h>^2`` from spacer nonuniformity.

    Reported in the uncertainty budget as a bound, never applied as a
    correction.
    """
    return geom.gap_variance / geom.mean_gap_h**2


def field_squared_integral(geom: CapacitorGeometry, voltage: float) -> float:
    """Line integral of E^2 along the septum: ``(V0/<h>)**2 * L_eff`` (V^2/m)."""
    if not math.isfinite(voltage):
        raise ValueError(f"voltage must be finite, got {voltage!r}")
    return (voltage / geom.mean_gap_h) ** 2 * effective_length(geom)


def polarizability_phase(species: AtomSpecies, velocity: float,
                         field_sq_integral: float,
                         constants: PhysicalConstants = CODATA2018) -> float:
    """Polarizability phase shift ``2*pi*epsilon0*alpha/(hbar*v) * int E^2 dz`` (rad).

    The induced-dipole energy shift raises the atom's kinetic energy inside
    the field; the accumulated phase is proportional to 1/v.
    """
    if not velocity > 0.0:
        raise ValueError(f"velocity must be positive, got {velocity!r}")
    return (2.0 * math.pi * constants.epsilon0 * species.polarizability
            / (constants.hbar * velocity)) * field_sq_integral


def phase_coefficient(species: AtomSpecies, geom: CapacitorGeometry, u: float,
                      constants: PhysicalConstants = CODATA2018) -> float:
    """Phase shift per applied volt squared (rad/V^2).

    ``2*pi*epsilon0*alpha*L_eff / (hbar*u*<h>**2)``; multiplying by V0^2
    reproduces :func:`polarizability_phase` at v = u exactly.
    """
    if not u > 0.0:
        raise ValueError(f"velocity must be positive, got {u!r}")
    return (2.0 * math.pi * constants.epsilon0 * species.polarizability
            * effective_length(geom)) / (constants.hbar * u * geom.mean_gap_h**2)


def supersonic_velocity(nozzle_T0: float, carrier_mass: float,
                        slip_fraction: float = 0.0,
                        constants: PhysicalConstants = CODATA2018) -> float:
    """Terminal velocity of a seeded supersonic beam (m/s).

    ``sqrt(5*kB*T0/m) * (1 + slip_fraction)`` for a monoatomic carrier gas of
    mass ``m`` expanding from nozzle temperature ``T0``; ``slip_fraction``
    accounts for the velocity slip of the light seeded species.
    """
    if not nozzle_T0 > 0.0:
        raise ValueError(f"nozzle temperature must be positive, got {nozzle_T0!r}")
    if not carrier_mass > 0.0:
        raise ValueError(f"carrier mass must be positive, got {carrier_mass!r}")
    if slip_fraction < 0.0:
        raise ValueError(f"slip fraction must be nonnegative, got {slip_fraction!r}")
    return math.sqrt(5.0 * constants.kB * nozzle_T0 / carrier_mass) * (1.0 + slip_fraction)


def bragg_angle(species: AtomSpecies, u: float, laser_wavelength: float,
                constants: PhysicalConstants = CODATA2018) -> float:
    """First-order Bragg angle ``planck/(m*u*lambda_L)`` (rad).

    Here ``planck`` is the Planck constant, not the capacitor gap.
    """
    if not (u > 0.0 and laser_wavelength > 0.0):
        raise ValueError("velocity and laser wavelength must be positive")
    return constants.planck / (species.mass * u * laser_wavelength)


def velocity_from_bragg(species: AtomSpecies, theta_bragg: float,
                        laser_wavelength: float,
                        constants: PhysicalConstants = CODATA2018) -> float:
    """Velocity corresponding to a measured first-order Bragg angle (m/s)."""
    if not (theta_bragg > 0.0 and laser_wavelength > 0.0):
        raise ValueError("Bragg angle and laser wavelength must be positive")
    return constants.planck / (species.mass * theta_bragg * laser_wavelength)


def de_broglie_wavelength(species: AtomSpecies, v: float,
                          constants: PhysicalConstants = CODATA2018) -> float:
    """Matter wavelength ``planck/(m*v)`` (m)."""
    if not v > 0.0:
        raise ValueError(f"velocity must be positive, got {v!r}")
    return constants.planck / (species.mass * v)


def velocity_fraction_change(species: AtomSpecies, v: float, L_eff: float,
                             phase: float,
                             constants: PhysicalConstants = CODATA2018) -> float:
    """Fractional velocity increase inside the field region (dimensionless).

    ``(lambda_dB / L_eff) * (phase / 2*pi)``: the phase measurement is
    equivalent to measuring this tiny velocity change.
    """
    if not L_eff > 0.0:
        raise ValueError(f"effective length must be positive, got {L_eff!r}")
    lam = de_broglie_wavelength(species, v, constants)
    return (lam / L_eff) * (phase / (2.0 * math.pi))
