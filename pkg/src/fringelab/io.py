"""File formats: configuration, campaign manifests, recordings, fits, reports.

Everything on disk is either a two-column CSV (one per recording) or a
versioned JSON document.  Every JSON document carries ``format`` and
``version`` fields; readers reject unknown formats and unknown major
versions.  JSON is written with sorted keys so reruns are byte-identical
for identical content.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import VelocityMeasurement
from .constants import CODATA2018, PhysicalConstants
from .errors import ConfigError
from .fitting import FringeFit
from .physics import AtomSpecies, BeamModel, CapacitorGeometry, lithium7
from .synthesis import (DriftModel, FringeTruth, Recording, RecordingConfig,
                        ScheduleEntry, VoltageSchedule)

__all__ = [
    "CONFIG_FORMAT",
    "MANIFEST_FORMAT",
    "FITS_FORMAT",
    "REPORT_FORMAT",
    "FORMAT_VERSION",
    "BeamSource",
    "SchedulePlan",
    "GeometryUncertainty",
    "LabConfig",
    "default_config",
    "load_config",
    "save_config",
    "config_sha256",
    "write_recording_csv",
    "read_recording_csv",
    "ManifestRecord",
    "CampaignManifest",
    "write_campaign",
    "load_manifest",
    "write_fit_results",
    "load_fit_results",
    "write_json_document",
    "load_json_document",
]

CONFIG_FORMAT = "fringelab/config"
MANIFEST_FORMAT = "fringelab/manifest"
FITS_FORMAT = "fringelab/fit-results"
REPORT_FORMAT = "fringelab/report"
FORMAT_VERSION = "1.0"


def _check_document(doc: dict, expected_format: str, path) -> None:
    fmt = doc.get("format")
    if fmt != expected_format:
        raise ConfigError(f"{path}: expected format {expected_format!r}, found {fmt!r}")
    version = str(doc.get("version", ""))
    major = version.split(".", 1)[0]
    expected_major = FORMAT_VERSION.split(".", 1)[0]
    if major != expected_major:
        raise ConfigError(
            f"{path}: unsupported {expected_format} version {version!r} "
            f"(this tool reads major version {expected_major})"
        )


def write_json_document(path, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def load_json_document(path, expected_format: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _check_document(doc, expected_format, path)
    return doc


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BeamSource:
    """Supersonic-source parameters for the beam-velocity cross-check.

    The default carrier mass is calibrated so the cross-check reproduces the
    beam velocity of the default lithium campaign; it matches standard argon
    (39.948 u) to 0.2 percent, equivalent to shifting the nozzle temperature
    within its own uncertainty.
    """

    nozzle_temperature: float = 1073.0        # K
    nozzle_temperature_sigma: float = 11.0    # K
    carrier_mass: float = 6.6198e-26          # kg
    slip_fraction: float = 0.01

    def __post_init__(self):
        if not self.nozzle_temperature > 0.0:
            raise ValueError("nozzle temperature must be positive")
        if not self.carrier_mass > 0.0:
            raise ValueError("carrier mass must be positive")
        if self.slip_fraction < 0.0:
            raise ValueError("slip fraction must be nonnegative")


@dataclass(frozen=True)
class SchedulePlan:
    """Parameters of the standard alternating voltage schedule."""

    count: int = 44
    voltage_step: float = 10.0  # V per recording index
    dead_time: float = 30.0     # s between recordings

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("schedule count must be at least 1")
        if self.dead_time < 0.0:
            raise ValueError("dead time must be nonnegative")


@dataclass(frozen=True)
class GeometryUncertainty:
    """One-sigma uncertainties of the measured capacitor dimensions."""

    electrode_length_2a_sigma: float = 0.10e-3  # m, on 2a
    gap_sigma: float = 0.003e-3                 # m, on <h>

    def __post_init__(self):
        if self.electrode_length_2a_sigma < 0.0 or self.gap_sigma < 0.0:
            raise ValueError("geometry sigmas must be nonnegative")


@dataclass
class LabConfig:
    """Everything the pipeline needs, as read from one configuration file."""

    constants: PhysicalConstants
    species: AtomSpecies
    geometry: CapacitorGeometry
    beam: BeamModel
    source: BeamSource
    laser_wavelength: float
    recording: RecordingConfig
    drift: DriftModel
    plan: SchedulePlan
    uncertainty: GeometryUncertainty
    velocities: list[VelocityMeasurement] = field(default_factory=list)
    truth_phase_coeff: float | None = None


def default_config() -> LabConfig:
    """The default lithium campaign: geometry, beam, schedule, and noise model."""
    constants = CODATA2018
    species = lithium7(24.33e-30, constants)
    geometry = CapacitorGeometry(half_length_a=25.00e-3, mean_gap_h=2.056e-3,
                                 septum_offset_x=50e-6, gap_variance=(10e-6) ** 2)
    beam = BeamModel(most_probable_velocity_u=1065.7, speed_ratio=8.0, species=species)
    return LabConfig(
        constants=constants,
        species=species,
        geometry=geometry,
        beam=beam,
        source=BeamSource(),
        laser_wavelength=671e-9,
        recording=RecordingConfig(),
        drift=DriftModel(),
        plan=SchedulePlan(),
        uncertainty=GeometryUncertainty(),
        velocities=[
            VelocityMeasurement("doppler", 1066.4, 8.0),
            VelocityMeasurement("bragg", 1065.0, 8.4),
        ],
        truth_phase_coeff=1.3870e-4,
    )


def config_to_dict(cfg: LabConfig) -> dict:
    c = cfg.constants
    doc = {
        "format": CONFIG_FORMAT,
        "version": FORMAT_VERSION,
        "constants": {"epsilon0": c.epsilon0, "hbar": c.hbar, "planck": c.planck,
                      "kB": c.kB, "amu": c.amu},
        "species": {"name": cfg.species.name, "mass_kg": cfg.species.mass,
                    "polarizability_m3": cfg.species.polarizability},
        "geometry": {"half_length_a_m": cfg.geometry.half_length_a,
                     "mean_gap_h_m": cfg.geometry.mean_gap_h,
                     "septum_offset_x_m": cfg.geometry.septum_offset_x,
                     "gap_variance_m2": cfg.geometry.gap_variance},
        "beam": {"most_probable_velocity_u_mps": cfg.beam.most_probable_velocity_u,
                 "speed_ratio": cfg.beam.speed_ratio},
        "source": {"nozzle_temperature_K": cfg.source.nozzle_temperature,
                   "nozzle_temperature_sigma_K": cfg.source.nozzle_temperature_sigma,
                   "carrier_mass_kg": cfg.source.carrier_mass,
                   "slip_fraction": cfg.source.slip_fraction},
        "laser": {"wavelength_m": cfg.laser_wavelength},
        "recording": {"n_channels": cfg.recording.n_channels,
                      "dwell_time_s": cfg.recording.dwell_time,
                      "mean_rate_cps": cfg.recording.mean_rate,
                      "base_visibility": cfg.recording.base_visibility,
                      "ramp_b_rad_per_channel": cfg.recording.ramp_b,
                      "ramp_c_rad_per_channel2": cfg.recording.ramp_c,
                      "collimation_slit_e1_m": cfg.recording.collimation_slit_e1,
                      "detection_slit_eD_m": cfg.recording.detection_slit_eD},
        "drift": {"linear_drift_rad_per_min": cfg.drift.linear_drift,
                  "scatter_rms_rad": cfg.drift.scatter_rms,
                  "scatter_period_recordings": cfg.drift.scatter_period,
                  "scatter_enabled": cfg.drift.scatter_enabled,
                  "scatter_white_fraction": cfg.drift.scatter_white_fraction},
        "schedule": {"count": cfg.plan.count,
                     "voltage_step_V": cfg.plan.voltage_step,
                     "dead_time_s": cfg.plan.dead_time},
        "uncertainty": {
            "electrode_length_2a_sigma_m": cfg.uncertainty.electrode_length_2a_sigma,
            "gap_sigma_m": cfg.uncertainty.gap_sigma},
        "velocities": [{"method": v.method, "u_mps": v.u, "sigma_mps": v.sigma}
                       for v in cfg.velocities],
    }
    if cfg.truth_phase_coeff is not None:
        doc["truth"] = {"phase_coeff_rad_per_V2": cfg.truth_phase_coeff}
    return doc


def _section(doc: dict, name: str, path) -> dict:
    try:
        sec = doc[name]
    except KeyError:
        raise ConfigError(f"{path}: missing section {name!r}") from None
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}: section {name!r} must be an object")
    return sec


def _get(sec: dict, key: str, section: str, path):
    try:
        return sec[key]
    except KeyError:
        raise ConfigError(f"{path}: missing key {section}.{key}") from None


def config_from_dict(doc: dict, path="<config>") -> LabConfig:
    def build(section, ctor, mapping):
        sec = _section(doc, section, path)
        kwargs = {arg: _get(sec, key, section, path) for arg, key in mapping.items()}
        try:
            return ctor(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid section {section!r}: {exc}") from None

    constants = build("constants", PhysicalConstants,
                      {k: k for k in ("epsilon0", "hbar", "planck", "kB", "amu")})
    species = build("species", AtomSpecies,
                    {"name": "name", "mass": "mass_kg",
                     "polarizability": "polarizability_m3"})
    geometry = build("geometry", CapacitorGeometry,
                     {"half_length_a": "half_length_a_m", "mean_gap_h": "mean_gap_h_m",
                      "septum_offset_x": "septum_offset_x_m",
                      "gap_variance": "gap_variance_m2"})
    beam_sec = _section(doc, "beam", path)
    try:
        beam = BeamModel(
            most_probable_velocity_u=_get(beam_sec, "most_probable_velocity_u_mps",
                                          "beam", path),
            speed_ratio=_get(beam_sec, "speed_ratio", "beam", path),
            species=species)
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid section 'beam': {exc}") from None
    source = build("source", BeamSource,
                   {"nozzle_temperature": "nozzle_temperature_K",
                    "nozzle_temperature_sigma": "nozzle_temperature_sigma_K",
                    "carrier_mass": "carrier_mass_kg",
                    "slip_fraction": "slip_fraction"})
    laser = _get(_section(doc, "laser", path), "wavelength_m", "laser", path)
    recording = build("recording", RecordingConfig,
                      {"n_channels": "n_channels", "dwell_time": "dwell_time_s",
                       "mean_rate": "mean_rate_cps", "base_visibility": "base_visibility",
                       "ramp_b": "ramp_b_rad_per_channel",
                       "ramp_c": "ramp_c_rad_per_channel2",
                       "collimation_slit_e1": "collimation_slit_e1_m",
                       "detection_slit_eD": "detection_slit_eD_m"})
    drift = build("drift", DriftModel,
                  {"linear_drift": "linear_drift_rad_per_min",
                   "scatter_rms": "scatter_rms_rad",
                   "scatter_period": "scatter_period_recordings",
                   "scatter_enabled": "scatter_enabled",
                   "scatter_white_fraction": "scatter_white_fraction"})
    plan = build("schedule", SchedulePlan,
                 {"count": "count", "voltage_step": "voltage_step_V",
                  "dead_time": "dead_time_s"})
    uncertainty = build("uncertainty", GeometryUncertainty,
                        {"electrode_length_2a_sigma": "electrode_length_2a_sigma_m",
                         "gap_sigma": "gap_sigma_m"})
    velocities = []
    for entry in doc.get("velocities", []):
        try:
            velocities.append(VelocityMeasurement(entry["method"], entry["u_mps"],
                                                  entry["sigma_mps"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid velocities entry {entry!r}: {exc}") from None
    truth = doc.get("truth", {})
    truth_k = truth.get("phase_coeff_rad_per_V2") if isinstance(truth, dict) else None
    return LabConfig(constants=constants, species=species, geometry=geometry,
                     beam=beam, source=source, laser_wavelength=float(laser),
                     recording=recording, drift=drift, plan=plan,
                     uncertainty=uncertainty, velocities=velocities,
                     truth_phase_coeff=truth_k)


def load_config(path) -> LabConfig:
    doc = load_json_document(path, CONFIG_FORMAT)
    return config_from_dict(doc, path)


def save_config(path, cfg: LabConfig) -> None:
    write_json_document(path, config_to_dict(cfg))


def config_sha256(cfg: LabConfig) -> str:
    payload = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


# ---------------------------------------------------------------------------
# recordings and manifests


def write_recording_csv(path, recording: Recording) -> None:
    """Two columns, header row ``channel,counts``, newline-terminated."""
    lines = ["channel,counts"]
    for ch, value in enumerate(recording.counts):
        value = float(value)
        if value.is_integer():
            lines.append(f"{ch},{int(value)}")
        else:
            lines.append(f"{ch},{value!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_recording_csv(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{path}: recording file not found") from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != "channel,counts":
        raise ConfigError(f"{path}:1: expected header 'channel,counts'")
    counts = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ConfigError(f"{path}:{ln}: expected two comma-separated columns")
        try:
            channel, value = int(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"{path}:{ln}: non-numeric entry {line!r}") from None
        if channel != len(counts):
            raise ConfigError(f"{path}:{ln}: channels must be consecutive from 0")
        if not (math.isfinite(value) and value >= 0.0):
            raise ConfigError(f"{path}:{ln}: counts must be finite and nonnegative")
        counts.append(value)
    if not counts:
        raise ConfigError(f"{path}: recording contains no channels")
    return np.asarray(counts)


@dataclass
class ManifestRecord:
    index: int
    voltage: float
    start_time: float
    file: str
    truth: FringeTruth | None = None


@dataclass
class CampaignManifest:
    """Index of a simulated campaign: config, seed, and recording files."""

    config: LabConfig
    seed: int
    blind: bool
    records: list[ManifestRecord]
    phase_coeff: float | None
    base_dir: Path

    def schedule(self) -> VoltageSchedule:
        return VoltageSchedule(tuple(
            ScheduleEntry(r.index, r.voltage, r.start_time) for r in self.records))

    def recording_path(self, record: ManifestRecord) -> Path:
        return self.base_dir / record.file

    def load_recording(self, record: ManifestRecord) -> Recording:
        counts = read_recording_csv(self.recording_path(record))
        return Recording(index=record.index, voltage=record.voltage,
                         start_time=record.start_time, counts=counts,
                         truth=record.truth)


def _truth_to_dict(t: FringeTruth) -> dict:
    return dataclasses.asdict(t)


def _truth_from_dict(d: dict) -> FringeTruth:
    return FringeTruth(**d)


def write_campaign(out_dir, cfg: LabConfig, recordings: list[Recording],
                   seed: int, blind: bool,
                   phase_coeff: float | None) -> Path:
    """Write recording CSVs plus the campaign manifest; returns the manifest path.

    With ``blind`` set, per-recording truth blocks and the campaign phase
    coefficient are omitted from the manifest.
    """
    out_dir = Path(out_dir)
    rec_dir = out_dir / "recordings"
    rec_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in recordings:
        name = f"recordings/rec_{rec.index:03d}.csv"
        write_recording_csv(out_dir / name, rec)
        entry = {"index": rec.index, "voltage_V": rec.voltage,
                 "start_time_s": rec.start_time, "file": name}
        if not blind and rec.truth is not None:
            entry["truth"] = _truth_to_dict(rec.truth)
        entries.append(entry)
    doc = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "seed": seed,
        "blind": blind,
        "config": config_to_dict(cfg),
        "recordings": entries,
    }
    if not blind and phase_coeff is not None:
        doc["phase_coeff_rad_per_V2"] = phase_coeff
    manifest_path = out_dir / "manifest.json"
    write_json_document(manifest_path, doc)
    return manifest_path


def load_manifest(path) -> CampaignManifest:
    path = Path(path)
    doc = load_json_document(path, MANIFEST_FORMAT)
    cfg = config_from_dict(doc.get("config", {}), f"{path}#config")
    records = []
    for entry in doc.get("recordings", []):
        try:
            truth = _truth_from_dict(entry["truth"]) if "truth" in entry else None
            records.append(ManifestRecord(index=int(entry["index"]),
                                          voltage=float(entry["voltage_V"]),
                                          start_time=float(entry["start_time_s"]),
                                          file=str(entry["file"]), truth=truth))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid recording entry {entry!r}: {exc}") from None
    if not records:
        raise ConfigError(f"{path}: manifest lists no recordings")
    manifest = CampaignManifest(config=cfg, seed=int(doc.get("seed", 0)),
                                blind=bool(doc.get("blind", False)),
                                records=records,
                                phase_coeff=doc.get("phase_coeff_rad_per_V2"),
                                base_dir=path.parent)
    missing = [r.file for r in records if not manifest.recording_path(r).exists()]
    if missing:
        raise ConfigError(f"{path}: referenced recording files missing: {missing}")
    return manifest


# ---------------------------------------------------------------------------
# fit results


def _fit_to_dict(fit: FringeFit) -> dict:
    return {
        "I0": fit.I0, "visibility": fit.visibility,
        "a": fit.a, "b": fit.b, "c": fit.c,
        "covariance": fit.covariance.tolist(),
        "mean_phase_rad": fit.mean_phase,
        "mean_phase_sigma_rad": fit.mean_phase_sigma,
        "fixed_ramp": fit.fixed_ramp,
        "residual_chi2": fit.residual_chi2,
        "n_channels": fit.n_channels,
        "dof": fit.dof,
        "branch_offset": fit.branch_offset,
        "branch_ambiguous": fit.branch_ambiguous,
    }


def _fit_from_dict(d: dict) -> FringeFit:
    return FringeFit(
        I0=d["I0"], visibility=d["visibility"], a=d["a"], b=d["b"], c=d["c"],
        covariance=np.asarray(d["covariance"]),
        mean_phase=d["mean_phase_rad"], mean_phase_sigma=d["mean_phase_sigma_rad"],
        fixed_ramp=d["fixed_ramp"], residual_chi2=d["residual_chi2"],
        n_channels=d["n_channels"], dof=d["dof"],
        branch_offset=d.get("branch_offset", 0),
        branch_ambiguous=d.get("branch_ambiguous", False),
    )


def write_fit_results(path, manifest_path, fits: dict[int, FringeFit],
                      failures: dict[int, str],
                      voltages: dict[int, float]) -> None:
    entries = []
    for index in sorted(set(fits) | set(failures)):
        entry = {"index": index, "voltage_V": voltages.get(index)}
        if index in fits:
            entry["ok"] = True
            entry.update(_fit_to_dict(fits[index]))
        else:
            entry["ok"] = False
            entry["error"] = failures[index]
        entries.append(entry)
    doc = {
        "format": FITS_FORMAT,
        "version": FORMAT_VERSION,
        "manifest": str(manifest_path),
        "fits": entries,
    }
    write_json_document(path, doc)


def load_fit_results(path) -> tuple[str, dict[int, FringeFit], dict[int, str]]:
    doc = load_json_document(path, FITS_FORMAT)
    fits: dict[int, FringeFit] = {}
    failures: dict[int, str] = {}
    for entry in doc.get("fits", []):
        try:
            index = int(entry["index"])
            if entry.get("ok"):
                fits[index] = _fit_from_dict(entry)
            else:
                failures[index] = str(entry.get("error", "unknown failure"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: invalid fit entry: {exc}") from None
    if not fits and not failures:
        raise ConfigError(f"{path}: fit-results file lists no fits")
    return str(doc.get("manifest", "")), fits, failures
