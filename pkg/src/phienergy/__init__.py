"""
Energy modeling for CPU + Xeon Phi systems from frequency-sweep measurements.

Typical flow: load runs (:mod:`ingest`), integrate per-phase energy
(:mod:`analyze`), fit the time and power models (:mod:`model`), then pick
the energy-optimal P-state (:mod:`optimize`). :mod:`synth` generates runs
with known parameters for checking all of the above.
"""
from .analyze import RunAnalysis, analyze_run, phase_power, segment_phases, unwrap_counter
from .ingest import load_bundle, write_bundle
from .model import (
    SweepPoint,
    boundedness,
    fit_model,
    fit_power_model,
    fit_time_model,
    predict_energy,
    predict_power,
    predict_time,
)
from .optimize import (
    energy_curve,
    grid_minimize,
    optimal_frequency_closed,
    optimal_frequency_quartic,
    optimal_pstate,
)
from .synth import GroundTruth, synth_run, synth_strong_scaling, synth_sweep
from .types import DEFAULT_PSTATES, FittedModel, PStateTable, validate_manifest

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PSTATES", "FittedModel", "GroundTruth", "PStateTable", "RunAnalysis", "SweepPoint",
    "analyze_run", "boundedness", "energy_curve", "fit_model", "fit_power_model",
    "fit_time_model", "grid_minimize", "load_bundle", "optimal_frequency_closed",
    "optimal_frequency_quartic", "optimal_pstate", "phase_power", "predict_energy",
    "predict_power", "predict_time", "segment_phases", "synth_run", "synth_strong_scaling",
    "synth_sweep", "unwrap_counter", "validate_manifest", "write_bundle",
]
