"""Closed-form physics: constants, geometry, and every analytic relation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fringelab.constants import (ARGON_MASS_AMU, CODATA2018, PhysicalConstants,
                                 si_to_volume_polarizability,
                                 volume_to_si_polarizability)
from fringelab.io import BeamSource
from fringelab.physics import (AtomSpecies, BeamModel, CapacitorGeometry,
                               bragg_angle, correction_bounds,
                               de_broglie_wavelength, effective_length,
                               field_squared_integral, gap_variance_bound,
                               lithium7, phase_coefficient,
                               polarizability_phase, supersonic_velocity,
                               velocity_fraction_change, velocity_from_bragg)

THREE_PI = 3.0 * math.pi


class TestConstants:
    def test_defaults_positive_and_consistent(self):
        c = CODATA2018
        for value in (c.epsilon0, c.hbar, c.planck, c.kB, c.amu):
            assert value > 0.0
        assert abs(c.planck - 2.0 * math.pi * c.hbar) / c.planck < 1e-12

    def test_rejects_inconsistent_planck(self):
        with pytest.raises(ValueError, match="inconsistent"):
            PhysicalConstants(hbar=1.054571817e-34, planck=6.7e-34)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            PhysicalConstants(kB=-1.0)

    def test_polarizability_conversion_roundtrip(self):
        alpha = 24.33e-30
        si = volume_to_si_polarizability(alpha)
        assert si == pytest.approx(4.0 * math.pi * CODATA2018.epsilon0 * alpha)
        assert si_to_volume_polarizability(si) == pytest.approx(alpha, rel=1e-15)


class TestDomainTypes:
    def test_species_validation(self):
        with pytest.raises(ValueError):
            AtomSpecies("x", -1.0, 1e-30)
        with pytest.raises(ValueError):
            AtomSpecies("x", 1e-26, 0.0)

    def test_geometry_validation(self):
        with pytest.raises(ValueError):
            CapacitorGeometry(half_length_a=1e-3, mean_gap_h=2e-3)
        with pytest.raises(ValueError):
            CapacitorGeometry(half_length_a=25e-3, mean_gap_h=2e-3,
                              septum_offset_x=3e-3)

    def test_beam_requires_narrow_distribution(self, li7):
        with pytest.raises(ValueError):
            BeamModel(most_probable_velocity_u=1000.0, speed_ratio=0.9, species=li7)

    def test_lithium7_mass(self):
        li = lithium7()
        assert li.mass == pytest.approx(7.016 * CODATA2018.amu, rel=1e-4)


class TestEffectiveLength:
    def test_reference_geometry(self, reference_geometry):
        # 2a = 50.00 mm, <h> = 2.056 mm -> 48.691 mm
        assert effective_length(reference_geometry) == pytest.approx(48.691e-3, rel=1e-4)

    def test_thin_gap_limit(self):
        geom = CapacitorGeometry(half_length_a=25e-3, mean_gap_h=1e-12)
        assert effective_length(geom) == pytest.approx(50e-3, rel=1e-9)

    def test_half_pi_gap(self):
        geom = CapacitorGeometry(half_length_a=25e-3, mean_gap_h=math.pi / 2 * 1e-3)
        assert effective_length(geom) == pytest.approx(49e-3, rel=1e-12)

    @given(a=st.floats(5e-3, 0.5), frac=st.floats(1e-3, 0.45))
    @settings(max_examples=50, deadline=None)
    def test_linear_in_a_and_h_and_below_2a(self, a, frac):
        h = frac * a
        geom = CapacitorGeometry(half_length_a=a, mean_gap_h=h)
        L = effective_length(geom)
        assert L < 2.0 * a
        geom2 = CapacitorGeometry(half_length_a=2 * a, mean_gap_h=h)
        assert effective_length(geom2) == pytest.approx(L + 2 * a, rel=1e-12)
        geom3 = CapacitorGeometry(half_length_a=a, mean_gap_h=2 * h)
        assert effective_length(geom3) == pytest.approx(L - 2 * h / math.pi, rel=1e-9)


class TestCorrectionBounds:
    def test_exponential_bound(self, reference_geometry):
        b = correction_bounds(reference_geometry)
        assert b.exp_correction == pytest.approx(math.exp(-2 * math.pi * 25.0 / 2.056),
                                                 rel=1e-12)
        assert b.exp_correction < 1e-33  # "exponentially small", order 7e-34

    def test_offset_bound_at_50um(self, reference_geometry):
        b = correction_bounds(reference_geometry)
        assert b.offset_correction == pytest.approx((50e-6 / 2.056e-3) ** 2, rel=1e-12)
        assert b.offset_correction == pytest.approx(5.914e-4, rel=1e-3)
        assert b.offset_correction < 1e-3

    def test_on_septum_is_zero(self):
        geom = CapacitorGeometry(half_length_a=25e-3, mean_gap_h=2.056e-3,
                                 septum_offset_x=0.0)
        assert correction_bounds(geom).offset_correction == 0.0

    def test_gap_variance_bound(self, reference_geometry):
        assert gap_variance_bound(reference_geometry) == pytest.approx(
            (10e-6) ** 2 / (2.056e-3) ** 2, rel=1e-12)


class TestFieldSquaredIntegral:
    def test_zero_voltage(self, reference_geometry):
        assert field_squared_integral(reference_geometry, 0.0) == 0.0

    def test_reference_value_at_260V(self, reference_geometry):
        assert field_squared_integral(reference_geometry, 260.0) == pytest.approx(
            7.78667e8, rel=1e-4)

    def test_quadratic_scaling(self, reference_geometry):
        one = field_squared_integral(reference_geometry, 130.0)
        assert field_squared_integral(reference_geometry, 260.0) == pytest.approx(
            4.0 * one, rel=1e-12)

    def test_rejects_nonfinite(self, reference_geometry):
        with pytest.raises(ValueError):
            field_squared_integral(reference_geometry, math.inf)


class TestPolarizabilityPhase:
    def test_reference_anchor_close_to_3pi(self, li7, reference_geometry):
        integral = field_squared_integral(reference_geometry, 260.0)
        phi = polarizability_phase(li7, 1065.7, integral)
        assert phi == pytest.approx(9.378, abs=2e-3)
        assert abs(phi - THREE_PI) < 0.05

    def test_zero_integral(self, li7):
        assert polarizability_phase(li7, 1065.7, 0.0) == 0.0

    def test_one_over_v_law(self, li7):
        phi = polarizability_phase(li7, 1065.7, 1e8)
        assert polarizability_phase(li7, 1065.7 / 2, 1e8) == pytest.approx(
            2 * phi, rel=1e-12)

    @given(v=st.floats(10.0, 1e5))
    @settings(max_examples=50, deadline=None)
    def test_phase_times_v_constant(self, li7, v):
        ref = polarizability_phase(li7, 1000.0, 3e8) * 1000.0
        assert polarizability_phase(li7, v, 3e8) * v == pytest.approx(ref, rel=1e-12)

    def test_rejects_nonpositive_velocity(self, li7):
        with pytest.raises(ValueError):
            polarizability_phase(li7, 0.0, 1e8)


class TestPhaseCoefficient:
    def test_reference_value(self, li7, reference_geometry):
        k = phase_coefficient(li7, reference_geometry, 1065.7)
        assert k == pytest.approx(1.3870e-4, rel=1e-3)
        assert k == pytest.approx(1.38728e-4, rel=1e-4)

    def test_proportional_to_alpha(self, reference_geometry):
        k1 = phase_coefficient(lithium7(24.33e-30), reference_geometry, 1065.7)
        k2 = phase_coefficient(lithium7(12.165e-30), reference_geometry, 1065.7)
        assert k2 == pytest.approx(k1 / 2, rel=1e-12)

    def test_velocity_scaling(self, li7, reference_geometry):
        k = phase_coefficient(li7, reference_geometry, 1065.7)
        assert phase_coefficient(li7, reference_geometry, 2 * 1065.7) == pytest.approx(
            k / 2, rel=1e-12)

    def test_composition_identity(self, li7, reference_geometry):
        # coefficient * V^2 == polarizability_phase at v = u, for random draws
        rng = np.random.default_rng(42)
        for _ in range(100):
            a = rng.uniform(5e-3, 100e-3)
            h = rng.uniform(0.2e-3, 0.8 * a)
            geom = CapacitorGeometry(half_length_a=a, mean_gap_h=h)
            u = rng.uniform(100.0, 5000.0)
            v0 = rng.uniform(1.0, 1000.0)
            k = phase_coefficient(li7, geom, u)
            phi = polarizability_phase(li7, u, field_squared_integral(geom, v0))
            assert k * v0**2 == pytest.approx(phi, rel=1e-12)


class TestSupersonicVelocity:
    def test_standard_argon(self, constants):
        m_ar = ARGON_MASS_AMU * constants.amu
        assert supersonic_velocity(1073.0, m_ar) == pytest.approx(1056.71, abs=0.01)
        assert supersonic_velocity(1073.0, m_ar, 0.01) == pytest.approx(1067.27, abs=0.01)

    def test_source_default_cross_check(self):
        # The reference beam-velocity estimate corresponds to the calibrated
        # source mass; see BeamSource for the convention.
        src = BeamSource()
        u = supersonic_velocity(src.nozzle_temperature, src.carrier_mass,
                                src.slip_fraction)
        assert u == pytest.approx(1068.4, abs=0.15)
        bare = supersonic_velocity(src.nozzle_temperature, src.carrier_mass)
        assert bare == pytest.approx(1057.8, abs=0.15)

    def test_temperature_scaling(self, constants):
        m = ARGON_MASS_AMU * constants.amu
        u1 = supersonic_velocity(500.0, m)
        assert supersonic_velocity(2000.0, m) == pytest.approx(2 * u1, rel=1e-12)

    @given(T=st.floats(10.0, 3000.0), m_amu=st.floats(1.0, 200.0))
    @settings(max_examples=50, deadline=None)
    def test_sqrt_scaling_laws(self, constants, T, m_amu):
        m = m_amu * constants.amu
        u = supersonic_velocity(T, m)
        assert supersonic_velocity(4 * T, m) == pytest.approx(2 * u, rel=1e-12)
        assert supersonic_velocity(T, 4 * m) == pytest.approx(u / 2, rel=1e-12)
        assert supersonic_velocity(T, m, 0.0) == u

    def test_rejects_bad_inputs(self, constants):
        m = ARGON_MASS_AMU * constants.amu
        with pytest.raises(ValueError):
            supersonic_velocity(0.0, m)
        with pytest.raises(ValueError):
            supersonic_velocity(1000.0, -m)
        with pytest.raises(ValueError):
            supersonic_velocity(1000.0, m, -0.1)


class TestBraggAngle:
    def test_reference_value(self, li7):
        theta = bragg_angle(li7, 1065.0, 671e-9)
        assert theta == pytest.approx(79.6e-6, abs=0.2e-6)

    def test_inversion(self, li7):
        u = velocity_from_bragg(li7, 79.62e-6, 671e-9)
        assert u == pytest.approx(1065.0, abs=0.6)
        theta = bragg_angle(li7, u, 671e-9)
        assert theta == pytest.approx(79.62e-6, rel=1e-12)

    def test_velocity_scaling(self, li7):
        theta = bragg_angle(li7, 1065.0, 671e-9)
        assert bragg_angle(li7, 2 * 1065.0, 671e-9) == pytest.approx(theta / 2,
                                                                     rel=1e-12)

    @given(u=st.floats(10.0, 1e5))
    @settings(max_examples=50, deadline=None)
    def test_theta_times_u_constant(self, li7, u):
        ref = bragg_angle(li7, 1000.0, 671e-9) * 1000.0
        assert bragg_angle(li7, u, 671e-9) * u == pytest.approx(ref, rel=1e-12)


class TestVelocityFractionChange:
    def test_largest_field(self, li7, reference_geometry):
        L = effective_length(reference_geometry)
        k = phase_coefficient(li7, reference_geometry, 1065.7)
        phi = k * 450.0**2
        dv = velocity_fraction_change(li7, 1065.7, L, phi)
        assert dv == pytest.approx(4.90e-9, rel=1e-2)
        assert 4e-9 <= dv <= 6e-9  # nominal order: ~4e-9 at the largest field

    def test_three_mrad_sensitivity(self, li7, reference_geometry):
        # Direct evaluation gives ~5.2e-13; the nominal ~6e-13 figure is
        # matched within 30% (documented gap, the formula is applied as is).
        L = effective_length(reference_geometry)
        dv = velocity_fraction_change(li7, 1065.7, L, 3e-3)
        assert dv == pytest.approx(5.233e-13, rel=1e-3)
        assert abs(dv - 6e-13) / 6e-13 < 0.30

    def test_zero_phase(self, li7, reference_geometry):
        L = effective_length(reference_geometry)
        assert velocity_fraction_change(li7, 1065.7, L, 0.0) == 0.0

    def test_uses_de_broglie_wavelength(self, li7):
        lam = de_broglie_wavelength(li7, 1065.7)
        assert lam == pytest.approx(5.3368e-11, rel=1e-4)
        assert velocity_fraction_change(li7, 1065.7, 0.05, 2 * math.pi) == pytest.approx(
            lam / 0.05, rel=1e-12)


class TestPurity:
    def test_bit_identical_outputs(self, li7, reference_geometry):
        pairs = [
            (effective_length(reference_geometry), effective_length(reference_geometry)),
            (phase_coefficient(li7, reference_geometry, 1065.7),
             phase_coefficient(li7, reference_geometry, 1065.7)),
            (supersonic_velocity(1073.0, 6.62e-26, 0.01),
             supersonic_velocity(1073.0, 6.62e-26, 0.01)),
            (bragg_angle(li7, 1065.0, 671e-9), bragg_angle(li7, 1065.0, 671e-9)),
        ]
        for x, y in pairs:
            assert x == y
