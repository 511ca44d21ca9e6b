"""fringelab: a desk-scale laboratory for septum-capacitor atom interferometry.

The package simulates fringe-recording campaigns of a Mach-Zehnder atom
interferometer with an electric field applied to one arm, fits the
recordings, and recovers the atomic electric polarizability with a
propagated uncertainty budget.  See the README for the pipeline overview
and the ``fringelab`` command-line interface.
"""

__version__ = "0.1.0"

from .constants import CODATA2018, PhysicalConstants
from .dispersion import (DispersedFringe, VelocityDistribution,
                         complex_fringe_average, dispersed_signal,
                         dispersion_curve, second_order_approximation,
                         velocity_pdf)
from .errors import (AnalysisError, ConfigError, DegenerateFringeError,
                     FitError, FringelabError, QuadratureError)
from .fitting import FringeFit, fit_fixed_ramp, fit_reference, phase_branch_align
from .analysis import (BudgetTerm, JointFitResult, MeasurementResult,
                       ShiftPoint, VelocityMeasurement, align_campaign,
                       build_shift_points, combine_velocities,
                       extract_polarizability, joint_fit,
                       phase_shift_estimator)
from .physics import (AtomSpecies, BeamModel, CapacitorGeometry,
                      CorrectionBounds, bragg_angle, correction_bounds,
                      de_broglie_wavelength, effective_length,
                      field_squared_integral, gap_variance_bound, lithium7,
                      phase_coefficient, polarizability_phase,
                      supersonic_velocity, velocity_fraction_change,
                      velocity_from_bragg)
from .synthesis import (DriftModel, Recording, RecordingConfig, ScheduleEntry,
                        VoltageSchedule, generate_campaign, generate_recording,
                        make_standard_schedule)

__all__ = [
    "__version__",
    "AnalysisError", "AtomSpecies", "BeamModel", "BudgetTerm",
    "CapacitorGeometry", "CODATA2018", "ConfigError", "CorrectionBounds",
    "DegenerateFringeError", "DispersedFringe", "DriftModel", "FitError",
    "FringeFit", "FringelabError", "JointFitResult", "MeasurementResult",
    "PhysicalConstants", "QuadratureError", "Recording", "RecordingConfig",
    "ScheduleEntry", "ShiftPoint", "VelocityDistribution",
    "VelocityMeasurement", "VoltageSchedule",
    "align_campaign", "bragg_angle", "build_shift_points",
    "combine_velocities", "complex_fringe_average", "correction_bounds",
    "de_broglie_wavelength", "dispersed_signal", "dispersion_curve",
    "effective_length", "extract_polarizability", "field_squared_integral",
    "fit_fixed_ramp", "fit_reference", "gap_variance_bound",
    "generate_campaign", "generate_recording", "joint_fit", "lithium7",
    "make_standard_schedule", "phase_branch_align", "phase_coefficient",
    "phase_shift_estimator", "polarizability_phase",
    "second_order_approximation", "supersonic_velocity",
    "velocity_fraction_change", "velocity_from_bragg", "velocity_pdf",
]
