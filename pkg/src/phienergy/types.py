"""
Domain types shared across the package.

Units are fixed everywhere: frequencies in GHz, power in W, durations in s,
timestamps in integer ms since the epoch, counter energies in integer uJ.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


DEFAULT_WRAP_UJ = 4_294_967_295
PHYSICAL_CORES = 16


class ExecMode(str, Enum):
    NATIVE = "native"
    OFFLOAD = "offload"
    SYMMETRIC = "symmetric"
    HOST_ONLY = "host_only"


class Phase(str, Enum):
    BASELINE_IDLE = "baseline_idle"
    INSTRUMENTED_IDLE = "instrumented_idle"
    EXECUTION = "execution"
    POST_IDLE = "post_idle"


# any other affinity string is accepted as-is
KNOWN_AFFINITIES = ("compact", "scatter", "balanced")


@dataclass(frozen=True)
class PStateTable:
    """Discrete CPU frequency levels in GHz, strictly decreasing."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(float(f) for f in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise ValueError("PStateTable needs at least 2 levels")
        if any(f <= 0 for f in levels):
            raise ValueError("PStateTable levels must be positive")
        if any(a <= b for a, b in zip(levels, levels[1:])):
            raise ValueError("PStateTable levels must be strictly decreasing")

    @classmethod
    def from_iterable(cls, freqs) -> "PStateTable":
        """Build a table from frequencies in any order."""
        return cls(tuple(sorted({float(f) for f in freqs}, reverse=True)))

    @property
    def f_max(self) -> float:
        return self.levels[0]

    @property
    def f_min(self) -> float:
        return self.levels[-1]

    def __contains__(self, f) -> bool:
        return any(math.isclose(f, lvl, rel_tol=0, abs_tol=1e-9) for lvl in self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def neighbors(self, f: float) -> tuple:
        """Return the nearest levels at or below and at or above `f`.

        Either element is None when `f` lies outside the table.
        """
        below = [lvl for lvl in self.levels if lvl <= f]
        above = [lvl for lvl in self.levels if lvl >= f]
        return (max(below) if below else None, min(above) if above else None)


DEFAULT_PSTATES = PStateTable((2.01, 2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3, 1.2))


@dataclass(frozen=True)
class RunConfig:
    problem_size: int
    n_nodes: int
    n_mpi_tasks: int
    n_xeon_phi: int
    mic_affinity: str
    mic_exec_mode: ExecMode
    host_freq: float
    n_host_omp: int
    n_mic_omp: int
    app_name: str
    config_label: str
    dvfs_freq: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "mic_exec_mode", ExecMode(self.mic_exec_mode))

    def violations(self, table: PStateTable = DEFAULT_PSTATES) -> list:
        out = []
        for name in ("problem_size", "n_nodes", "n_mpi_tasks", "n_xeon_phi",
                     "n_host_omp", "n_mic_omp"):
            if getattr(self, name) < 0:
                out.append(Violation(f"config.{name}", "count must be >= 0"))
        if self.host_freq not in table:
            out.append(Violation("config.host_freq",
                                 f"{self.host_freq} GHz is not a P-state level"))
        if self.mic_exec_mode is ExecMode.HOST_ONLY and self.n_xeon_phi != 0:
            out.append(Violation("config.n_xeon_phi", "host_only runs must use 0 devices"))
        return out


@dataclass(frozen=True)
class Violation:
    """One failed manifest rule. Warnings never block loading."""

    field: str
    rule: str
    severity: str = "error"

    def __str__(self):
        return self.rule


TIMESTAMP_FIELDS = (
    "t0_system_meter_start",
    "t1_component_readers_start",
    "t2_app_start",
    "t3_app_end",
    "t4_readers_stop",
    "t5_cooldown_end",
)


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    config: RunConfig
    t0_system_meter_start: int
    t1_component_readers_start: int
    t2_app_start: int
    t3_app_end: int
    t4_readers_stop: int
    t5_cooldown_end: int
    exec_time_reported: float
    trace_paths: dict = field(default_factory=dict)
    synthetic: Optional[dict] = None

    @property
    def timestamps(self) -> tuple:
        return tuple(getattr(self, name) for name in TIMESTAMP_FIELDS)

    @property
    def exec_window_s(self) -> float:
        return (self.t3_app_end - self.t2_app_start) / 1000.0


def validate_manifest(m: RunManifest, table: PStateTable = DEFAULT_PSTATES) -> list:
    """Check every RunManifest invariant; never raises.

    Returns a list of :class:`Violation`. A reported execution time that
    deviates more than 10% from the measured window is a warning only.
    """
    out = []
    ts = m.timestamps
    for i in range(len(ts) - 1):
        if ts[i] >= ts[i + 1]:
            out.append(Violation(TIMESTAMP_FIELDS[i + 1],
                                 f"timestamps not increasing: t{i}≥t{i + 1}"))
    if not m.exec_time_reported > 0:
        out.append(Violation("exec_time_reported", "exec_time_reported must be > 0"))
    elif m.t3_app_end > m.t2_app_start:
        window = m.exec_window_s
        if abs(m.exec_time_reported - window) > 0.10 * window:
            out.append(Violation("exec_time_reported", "reported time deviates >10%",
                                 severity="warning"))
    out.extend(m.config.violations(table))
    return out


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemTrace:
    """Wall-meter samples, nominally 1 Hz."""

    t_ms: np.ndarray
    watts: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen_array(self.t_ms, np.int64))
        object.__setattr__(self, "watts", _frozen_array(self.watts, np.float64))

    def __len__(self):
        return len(self.t_ms)

    def __eq__(self, other):
        return (isinstance(other, SystemTrace)
                and np.array_equal(self.t_ms, other.t_ms)
                and np.array_equal(self.watts, other.watts))


@dataclass(frozen=True, eq=False)
class CounterTrace:
    """Raw cumulative package-energy counter readings, nominally every 50 ms."""

    t_ms: np.ndarray
    cumulative_uj: np.ndarray
    wrap_uj: int = DEFAULT_WRAP_UJ
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen_array(self.t_ms, np.int64))
        object.__setattr__(self, "cumulative_uj", _frozen_array(self.cumulative_uj, np.int64))
        object.__setattr__(self, "wrap_uj", int(self.wrap_uj))

    def __len__(self):
        return len(self.t_ms)

    def __eq__(self, other):
        return (isinstance(other, CounterTrace)
                and self.wrap_uj == other.wrap_uj
                and np.array_equal(self.t_ms, other.t_ms)
                and np.array_equal(self.cumulative_uj, other.cumulative_uj))


@dataclass(frozen=True, eq=False)
class MicTrace:
    """Per-connector power readings for one coprocessor, nominally every 50 ms."""

    device_index: int
    t_ms: np.ndarray
    pcie_w: np.ndarray
    c2x3_w: np.ndarray
    c2x4_w: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen_array(self.t_ms, np.int64))
        for name in ("pcie_w", "c2x3_w", "c2x4_w"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), np.float64))

    def __len__(self):
        return len(self.t_ms)

    def __eq__(self, other):
        return (isinstance(other, MicTrace)
                and self.device_index == other.device_index
                and all(np.array_equal(getattr(self, n), getattr(other, n))
                        for n in ("t_ms", "pcie_w", "c2x3_w", "c2x4_w")))


@dataclass(frozen=True)
class TraceBundle:
    manifest: RunManifest
    system: SystemTrace
    cpu_counter: CounterTrace
    mic: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mic", tuple(self.mic))


# nominal sampling period in ms per source
CADENCE_MS = {"system": 1000, "cpu": 50, "mic": 50}


def cadence_warnings(t_ms: np.ndarray, source: str) -> list:
    """Flag sampling intervals outside the nominal cadence +/- 50%.

    Intervals longer than 10x nominal are reported as gaps.
    """
    nominal = CADENCE_MS["mic" if source.startswith("mic") else source]
    out = []
    if len(t_ms) < 2:
        return out
    dt = np.diff(t_ms)
    gaps = np.flatnonzero(dt > 10 * nominal)
    irregular = np.flatnonzero(((dt < 0.5 * nominal) | (dt > 1.5 * nominal))
                               & (dt <= 10 * nominal))
    for i in gaps:
        out.append(f"{source}: gap of {int(dt[i])} ms after t={int(t_ms[i])}")
    if len(irregular):
        out.append(f"{source}: {len(irregular)} intervals outside {nominal} ms +/- 50%")
    return out


@dataclass(frozen=True)
class SourceStats:
    avg_power_w: float
    energy_j: float
    duration_s: float
    n_samples: int


@dataclass(frozen=True)
class PhaseSummary:
    """Per-source statistics for one protocol phase.

    `sources` maps "system", "cpu", "mic0", "mic1", ... to :class:`SourceStats`.
    Sources without enough samples in the phase are omitted.
    """

    phase: Phase
    duration_s: float
    sources: dict


class BoundClass(str, Enum):
    LATENCY_BOUND = "latency_bound"
    COMPUTE_BOUND = "compute_bound"
    BALANCED = "balanced"


@dataclass(frozen=True)
class FittedModel:
    t_on: float
    t_off: float
    k: float
    P_s: float
    n_cores: int
    f_max: float
    r2_time: float = 1.0
    r2_power: float = 1.0
    p_mic_avg: float = 0.0
    config_label: str = ""
    flags: tuple = ()

    def __post_init__(self):
        if self.t_on < 0 or self.t_off < 0:
            raise ValueError("t_on and t_off must be >= 0")
        if self.k < 0 or self.P_s < 0 or self.p_mic_avg < 0:
            raise ValueError("k, P_s and p_mic_avg must be >= 0")
        if self.n_cores < 1:
            raise ValueError("n_cores must be >= 1")
        if self.f_max <= 0:
            raise ValueError("f_max must be > 0")

    @property
    def boundedness(self) -> float:
        """t_off / t_on; ``inf`` when t_on is 0."""
        return self.t_off / self.t_on if self.t_on > 0 else math.inf
