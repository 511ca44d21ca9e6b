"""Physical constants and unit conventions.

All quantities are SI.  The capacitor gap is called ``gap_h`` throughout the
package and the Planck constant is called ``planck``, so the two never share
the symbol ``h``.

Polarizabilities are volume polarizabilities in m^3: an atom of volume
polarizability ``alpha`` in a static field E has energy
``U = -2*pi*epsilon0*alpha*E**2``.  Conversion helpers to and from the SI
convention ``U = -alpha_SI*E**2/2`` are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PhysicalConstants",
    "CODATA2018",
    "ARGON_MASS_AMU",
    "LITHIUM7_MASS_AMU",
    "volume_to_si_polarizability",
    "si_to_volume_polarizability",
]

#: Standard atomic weight of argon (carrier gas of the supersonic source).
ARGON_MASS_AMU = 39.948

#: Atomic mass of lithium-7 (AME2020), in atomic mass units.
LITHIUM7_MASS_AMU = 7.0160034366

# The SI-exact Planck constant; hbar is derived from it so the pair is
# consistent to machine precision (the usual 10-digit hbar is 6e-10 off).
_PLANCK = 6.62607015e-34
_HBAR = _PLANCK / (2.0 * math.pi)


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants used by the closed-form physics.

    Defaults are CODATA 2018 values.  All fields can be overridden (e.g. to
    reproduce an analysis performed with an older constants vintage), but the
    set must stay self-consistent: ``planck == 2*pi*hbar`` to 1e-12 relative.
    """

    epsilon0: float = 8.8541878128e-12  # vacuum permittivity, F/m
    hbar: float = _HBAR                 # reduced Planck constant, J s
    planck: float = _PLANCK             # Planck constant, J s
    kB: float = 1.380649e-23            # Boltzmann constant, J/K
    amu: float = 1.66053906660e-27      # atomic mass unit, kg

    def __post_init__(self):
        for name in ("epsilon0", "hbar", "planck", "kB", "amu"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"constant {name!r} must be finite and positive, got {value!r}")
        rel = abs(self.planck - 2.0 * math.pi * self.hbar) / self.planck
        if rel > 1e-12:
            raise ValueError(
                f"planck and hbar are inconsistent: |planck - 2*pi*hbar|/planck = {rel:.3e}"
            )


CODATA2018 = PhysicalConstants()


def volume_to_si_polarizability(alpha_volume, constants: PhysicalConstants = CODATA2018):
    """Convert a volume polarizability (m^3) to the SI convention (C m^2/V).

    The two conventions describe the same energy shift:
    ``-2*pi*epsilon0*alpha_volume*E**2 == -alpha_SI*E**2/2``.
    """
    return 4.0 * math.pi * constants.epsilon0 * alpha_volume


def si_to_volume_polarizability(alpha_si, constants: PhysicalConstants = CODATA2018):
    """Inverse of :func:`volume_to_si_polarizability`."""
    return alpha_si / (4.0 * math.pi * constants.epsilon0)
