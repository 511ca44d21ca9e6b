"""Synthetic fringe-recording campaigns.

Generates count data the way the real instrument produces it: a scan of the
piezo-driven mirror sweeps the fringe phase linearly (with a small quadratic
nonlinearity) across 471 channels while a hot-wire detector counts atoms;
recordings alternate between field-off and field-on, the voltage growing
with the recording index; the zero-field phase drifts slowly (thermal) and
scatters quasi-periodically between recordings; counting noise is Poisson.

Every recording carries an optional ``truth`` block with the exact fringe
parameters used to generate it, so fits can be validated against the
generator.  Generation is deterministic given the campaign seed: recording
``i`` uses the stream seeded by ``SeedSequence([seed, i])`` and campaign-
level draws (scatter) use ``SeedSequence([seed, 2**32])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CODATA2018, PhysicalConstants
from .dispersion import VelocityDistribution, dispersion_curve
from .physics import BeamModel, CapacitorGeometry, phase_coefficient

__all__ = [
    "RecordingConfig",
    "DriftModel",
    "ScheduleEntry",
    "VoltageSchedule",
    "FringeTruth",
    "Recording",
    "make_standard_schedule",
    "recording_rng",
    "scatter_sequence",
    "generate_recording",
    "generate_campaign",
]

#: Default linear ramp: about six fringes across the default 471 channels.
DEFAULT_RAMP_B = 2.0 * math.pi * 6.0 / 471.0

#: Expected-counts ceiling; Poisson sampling above this would overflow.
_COUNTS_GUARD = 1e15

#: Sub-stream tag for campaign-level draws (recording indices stay below it).
_CAMPAIGN_STREAM = 2**32


@dataclass(frozen=True)
class RecordingConfig:
    """Per-recording instrument settings.

    ``mean_rate`` is the detected flux in counts/s; the expected counts per
    channel are ``mean_rate * dwell_time``.  The two slit widths are campaign
    metadata only (they set the flux/visibility trade-off on the real
    instrument but enter no formula here).
    """

    n_channels: int = 471
    dwell_time: float = 0.36          # s per channel
    mean_rate: float = 1.0e5          # counts/s
    base_visibility: float = 0.62
    ramp_b: float = DEFAULT_RAMP_B    # rad/channel
    ramp_c: float = 1.0e-6            # rad/channel^2
    collimation_slit_e1: float = 18e-6   # m, metadata
    detection_slit_eD: float = 50e-6     # m, metadata

    def __post_init__(self):
        if self.n_channels < 2:
            raise ValueError(f"need at least 2 channels, got {self.n_channels!r}")
        if not self.dwell_time > 0.0:
            raise ValueError(f"dwell time must be positive, got {self.dwell_time!r}")
        if self.mean_rate < 0.0:
            raise ValueError("mean rate must be nonnegative")
        if not 0.0 <= self.base_visibility <= 1.0:
            raise ValueError(f"base visibility out of [0, 1]: {self.base_visibility!r}")


@dataclass(frozen=True)
class DriftModel:
    """Zero-field phase drift and recording-to-recording scatter.

    ``linear_drift`` is in rad/minute (thermal drift of the mirror support).
    The scatter is a stand-in for the unexplained quasi-periodic wander of
    the mean phase: a sinusoid in recording index with period
    ``scatter_period`` plus a white component, mixed by
    ``scatter_white_fraction`` (fraction of the variance that is white) and
    scaled so the total rms is ``scatter_rms``.  The default period of 8
    recordings is arbitrary.
    """

    linear_drift: float = 7.5e-3      # rad/minute
    scatter_rms: float = 33e-3        # rad
    scatter_period: float = 8.0       # recordings
    scatter_enabled: bool = True
    scatter_white_fraction: float = 0.5

    def __post_init__(self):
        if self.scatter_rms < 0.0:
            raise ValueError("scatter rms must be nonnegative")
        if not self.scatter_period > 0.0:
            raise ValueError("scatter period must be positive")
        if not 0.0 <= self.scatter_white_fraction <= 1.0:
            raise ValueError("scatter white fraction out of [0, 1]")

    def drift_rate(self) -> float:
        """Linear drift in rad/s."""
        return self.linear_drift / 60.0


@dataclass(frozen=True)
class ScheduleEntry:
    index: int
    voltage: float
    start_time: float


@dataclass(frozen=True)
class VoltageSchedule:
    """Ordered recording plan: odd indices field-off, even indices field-on."""

    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("schedule must contain at least one entry")
        times = [e.start_time for e in self.entries]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("schedule start times must be strictly increasing")
        for e in self.entries:
            if e.index % 2 == 1 and e.voltage != 0.0:
                raise ValueError(
                    f"odd-index entry {e.index} must have zero voltage, got {e.voltage!r}"
                )

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def make_standard_schedule(cfg: RecordingConfig, count: int = 44,
                           voltage_step: float = 10.0,
                           dead_time: float = 30.0,
                           t0: float = 0.0) -> VoltageSchedule:
    """Alternating field-off/field-on plan: V = 0 for odd i, V = step*i for even i.

    Start times advance by the recording duration (channels x dwell) plus a
    configurable dead time between recordings.
    """
    if count < 1:
        raise ValueError("schedule count must be at least 1")
    duration = cfg.n_channels * cfg.dwell_time
    entries = []
    for i in range(1, count + 1):
        voltage = 0.0 if i % 2 == 1 else voltage_step * i
        entries.append(ScheduleEntry(index=i, voltage=voltage,
                                     start_time=t0 + (i - 1) * (duration + dead_time)))
    return VoltageSchedule(entries=tuple(entries))


@dataclass(frozen=True)
class FringeTruth:
    """Exact fringe parameters behind a synthetic recording."""

    a: float                 # rad, constant phase (drift + scatter + dispersion shift)
    b: float                 # rad/channel (ramp + within-scan drift)
    c: float                 # rad/channel^2
    intensity: float         # expected counts per channel (I0)
    visibility: float        # effective fringe visibility (V0 * ratio)
    phi_m: float             # monochromatic polarizability phase at this voltage
    effective_phase: float   # dispersed phase shift entering a
    visibility_ratio: float  # dispersion contrast factor
    scatter: float           # rad, scatter draw applied to this recording
    drift_phase: float       # rad, accumulated linear drift at scan start
    mean_phase: float        # rad, channel average of a + b*n + c*n^2


@dataclass
class Recording:
    """One fringe scan: per-channel counts plus campaign metadata."""

    index: int
    voltage: float
    start_time: float
    counts: np.ndarray
    truth: FringeTruth | None = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 1:
            raise ValueError("counts must be a 1-D array")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")


def recording_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-recording random stream: SeedSequence([seed, index])."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def scatter_sequence(drift: DriftModel, indices, seed: int) -> np.ndarray:
    """Scatter draws for the given recording indices (campaign-level stream).

    Sinusoid amplitude and white sigma are set so the ensemble rms equals
    ``scatter_rms``; the sinusoid phase is a single uniform draw per
    campaign.
    """
    indices = np.asarray(list(indices), dtype=float)
    if not drift.scatter_enabled or drift.scatter_rms == 0.0:
        return np.zeros(indices.shape)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _CAMPAIGN_STREAM]))
    f_white = drift.scatter_white_fraction
    amp = drift.scatter_rms * math.sqrt(2.0 * (1.0 - f_white))
    sigma_white = drift.scatter_rms * math.sqrt(f_white)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    out = amp * np.sin(2.0 * math.pi * indices / drift.scatter_period + theta)
    out += rng.normal(0.0, sigma_white, size=indices.shape)
    return out


def _fringe_at_voltage(voltage: float, phase_coeff: float,
                       dist: VelocityDistribution) -> tuple[float, float, float]:
    """(phi_m, effective_phase, visibility_ratio) at the given voltage."""
    phi_m = phase_coeff * voltage * voltage
    if phi_m == 0.0:
        return 0.0, 0.0, 1.0
    eff, ratio = dispersion_curve(phi_m, dist)
    return phi_m, eff, ratio


def generate_recording(cfg: RecordingConfig, drift: DriftModel, beam: BeamModel,
                       geom: CapacitorGeometry, index: int, voltage: float,
                       start_time: float, seed: int, *,
                       phase_coeff: float | None = None,
                       scatter: float = 0.0,
                       noise: bool = True,
                       constants: PhysicalConstants = CODATA2018) -> Recording:
    """Generate one recording at the given voltage and start time.

    The channel phase is ``psi(n) = a + b*n + c*n**2`` with
    ``a = drift*start_time + scatter + effective_phase(V)`` and the ramp
    slope augmented by the drift accumulated per dwell.  Expected counts are
    ``dwell * rate * (1 + V_eff * cos(psi))`` with the dispersion-reduced
    visibility; counts are Poisson draws from the stream
    ``SeedSequence([seed, index])`` unless ``noise`` is False, in which case
    the expected values are stored directly.

    ``phase_coeff`` (rad/V^2) defaults to the physical coefficient of the
    supplied species/geometry/velocity; pass it explicitly to decouple the
    campaign truth from the species table.
    """
    if phase_coeff is None:
        phase_coeff = phase_coefficient(beam.species, geom,
                                        beam.most_probable_velocity_u, constants)
    dist = VelocityDistribution(u=beam.most_probable_velocity_u,
                                speed_ratio=beam.speed_ratio)
    phi_m, eff, ratio = _fringe_at_voltage(voltage, phase_coeff, dist)

    drift_phase = drift.drift_rate() * start_time
    a = drift_phase + scatter + eff
    b = cfg.ramp_b + drift.drift_rate() * cfg.dwell_time
    c = cfg.ramp_c
    visibility = cfg.base_visibility * ratio
    intensity = cfg.mean_rate * cfg.dwell_time

    n = np.arange(cfg.n_channels, dtype=float)
    psi = a + b * n + c * n * n
    expected = intensity * (1.0 + visibility * np.cos(psi))
    if expected.max(initial=0.0) > _COUNTS_GUARD:
        raise ValueError(
            f"expected counts exceed the overflow guard ({_COUNTS_GUARD:.0e}); "
            "reduce mean_rate or dwell_time"
        )
    if noise:
        counts = recording_rng(seed, index).poisson(expected)
    else:
        counts = expected

    nbar = (cfg.n_channels - 1) / 2.0
    nsq = (cfg.n_channels - 1) * (2 * cfg.n_channels - 1) / 6.0
    truth = FringeTruth(a=a, b=b, c=c, intensity=intensity, visibility=visibility,
                        phi_m=phi_m, effective_phase=eff, visibility_ratio=ratio,
                        scatter=scatter, drift_phase=drift_phase,
                        mean_phase=a + b * nbar + c * nsq)
    return Recording(index=index, voltage=voltage, start_time=start_time,
                     counts=counts, truth=truth)


def generate_campaign(cfg: RecordingConfig, drift: DriftModel, beam: BeamModel,
                      geom: CapacitorGeometry, schedule: VoltageSchedule,
                      seed: int, *,
                      phase_coeff: float | None = None,
                      noise: bool = True,
                      constants: PhysicalConstants = CODATA2018) -> list[Recording]:
    """Generate the full campaign in schedule order.

    Drift accumulates across recordings through the schedule start times;
    scatter draws come from the campaign-level stream so the whole campaign
    is reproducible from the single seed.
    """
    if phase_coeff is None:
        phase_coeff = phase_coefficient(beam.species, geom,
                                        beam.most_probable_velocity_u, constants)
    scatters = scatter_sequence(drift, (e.index for e in schedule), seed)
    recordings = []
    for entry, s in zip(schedule, scatters):
        recordings.append(generate_recording(
            cfg, drift, beam, geom, entry.index, entry.voltage, entry.start_time,
            seed, phase_coeff=phase_coeff, scatter=float(s), noise=noise,
            constants=constants))
    return recordings
