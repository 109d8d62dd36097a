"""
Per-run trace analysis: phase segmentation, counter unwrapping, per-phase
power/energy for each source and the run-level energy totals.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .types import (
    CounterTrace,
    MicTrace,
    Phase,
    PhaseSummary,
    SourceStats,
    SystemTrace,
    TraceBundle,
)

log = logging.getLogger(__name__)

# a measured execution window this much shorter than the reported time is
# treated as an early exit
SHORT_WINDOW_FRACTION = 0.9


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class Window:
    start_ms: int
    end_ms: int
    closed_start: bool = True
    closed_end: bool = False

    @property
    def duration_s(self) -> float:
        return (self.end_ms - self.start_ms) / 1000.0

    def mask(self, t_ms) -> np.ndarray:
        t_ms = np.asarray(t_ms)
        lo = t_ms >= self.start_ms if self.closed_start else t_ms > self.start_ms
        hi = t_ms <= self.end_ms if self.closed_end else t_ms < self.end_ms
        return lo & hi


def segment_phases(bundle) -> dict:
    """Map each protocol phase to its time window.

    baseline_idle = [t0, t1), instrumented_idle = [t1, t2),
    execution = [t2, t3], post_idle = (t3, t4].
    Accepts a TraceBundle or a bare RunManifest.
    """
    m = getattr(bundle, "manifest", bundle)
    if m.t3_app_end <= m.t2_app_start:
        raise ValueError(f"{m.run_id}: empty execution window")
    return {
        Phase.BASELINE_IDLE: Window(m.t0_system_meter_start, m.t1_component_readers_start),
        Phase.INSTRUMENTED_IDLE: Window(m.t1_component_readers_start, m.t2_app_start),
        Phase.EXECUTION: Window(m.t2_app_start, m.t3_app_end, True, True),
        Phase.POST_IDLE: Window(m.t3_app_end, m.t4_readers_stop, False, True),
    }


def unwrap_counter(cumulative, wrap_uj):
    """Per-interval energy deltas in uJ from a wrapping cumulative counter.

    Returns ``(deltas, anomalous)`` where ``anomalous`` is a boolean mask of
    intervals whose delta exceeds half the wrap range (double wrap or reset).
    """
    c = np.asarray(cumulative, dtype=np.int64)
    deltas = np.mod(np.diff(c), int(wrap_uj))
    anomalous = deltas > wrap_uj / 2
    return deltas, anomalous


def mic_total(trace: MicTrace) -> np.ndarray:
    """Device power per sample: sum of the three connector readings."""
    return trace.pcie_w + trace.c2x3_w + trace.c2x4_w


def trapezoid_energy(t_ms, watts) -> float:
    """Trapezoidal integral of a power series, in joules."""
    # difference in integer ms: epoch timestamps lose precision as float seconds
    dt = np.diff(np.asarray(t_ms, dtype=np.int64)) / 1000.0
    w = np.asarray(watts, dtype=np.float64)
    return float(np.sum(0.5 * (w[1:] + w[:-1]) * dt))


def phase_power(trace, window: Window):
    """Average power and energy of one source over the samples in `window`.

    Energy covers the span between the first and last sample inside the
    window and ``avg = energy / span``. Rate sources are integrated with the
    trapezoid rule; the counter source sums unwrapped deltas, dropping
    anomalous intervals from both energy and span.

    Returns ``(avg_power_w, energy_j, span_s, n_samples)``.
    """
    sel = window.mask(trace.t_ms)
    n = int(sel.sum())
    if n < 2:
        raise InsufficientSamples("insufficient samples")
    t = trace.t_ms[sel]

    if isinstance(trace, CounterTrace):
        deltas, anomalous = unwrap_counter(trace.cumulative_uj[sel], trace.wrap_uj)
        if anomalous.any():
            log.warning("dropping %d anomalous counter intervals", int(anomalous.sum()))
        dt = np.diff(t)
        energy = float(deltas[~anomalous].sum()) / 1e6
        span = float(dt[~anomalous].sum()) / 1000.0
        if span <= 0:
            raise InsufficientSamples("insufficient samples")
        return energy / span, energy, span, n

    if isinstance(trace, MicTrace):
        watts = mic_total(trace)[sel]
    elif isinstance(trace, SystemTrace):
        watts = trace.watts[sel]
    else:
        raise TypeError(f"unsupported trace type {type(trace).__name__}")
    energy = trapezoid_energy(t, watts)
    span = (int(t[-1]) - int(t[0])) / 1000.0
    return energy / span, energy, span, n


@dataclass
class RunAnalysis:
    run_id: str
    config_label: str
    host_freq: float
    problem_size: int
    n_devices: int
    exec_time_reported: float
    exec_window_s: float
    phases: list
    p_cpu_avg: float
    p_mic_avg_per_device: list
    p_mic_total: float
    p_system_exec: float
    e_cpu: float
    e_mic: float
    e_total: float
    overhead_w: float | None
    flags: list = field(default_factory=list)

    def phase(self, phase: Phase) -> PhaseSummary:
        for p in self.phases:
            if p.phase == phase:
                return p
        raise KeyError(phase)

    @property
    def p_avg(self) -> float:
        """Average CPU + coprocessor power over the execution window."""
        return self.e_total / self.exec_window_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases"] = [
            {"phase": p.phase.value, "duration_s": p.duration_s,
             "sources": {k: asdict(v) for k, v in p.sources.items()}}
            for p in self.phases
        ]
        return d


def _sources(bundle: TraceBundle):
    yield "system", bundle.system
    yield "cpu", bundle.cpu_counter
    for trace in bundle.mic:
        yield f"mic{trace.device_index}", trace


def analyze_run(bundle: TraceBundle) -> RunAnalysis:
    m = bundle.manifest
    windows = segment_phases(bundle)
    flags = []

    phases = []
    for phase, window in windows.items():
        stats = {}
        for name, trace in _sources(bundle):
            try:
                avg, _, _, n = phase_power(trace, window)
            except InsufficientSamples:
                if phase is Phase.EXECUTION:
                    raise InsufficientSamples(
                        f"{m.run_id}: insufficient {name} samples in execution window") from None
                continue
            stats[name] = SourceStats(avg, avg * window.duration_s, window.duration_s, n)
        phases.append(PhaseSummary(phase, window.duration_s, stats))

    execution = phases[2].sources
    t_exec = windows[Phase.EXECUTION].duration_s
    p_mic = [execution[f"mic{t.device_index}"].avg_power_w for t in bundle.mic]
    e_cpu = execution["cpu"].energy_j
    e_mic = float(sum(execution[f"mic{t.device_index}"].energy_j for t in bundle.mic))

    base = phases[0].sources.get("system")
    inst = phases[1].sources.get("system")
    overhead = inst.avg_power_w - base.avg_power_w if base and inst else None
    if overhead is None:
        flags.append("overhead unavailable: too few system samples in idle phases")

    if t_exec < SHORT_WINDOW_FRACTION * m.exec_time_reported:
        flags.append(f"short execution window: measured {t_exec:.3f} s, "
                     f"reported {m.exec_time_reported:.3f} s")
    _, anomalous = unwrap_counter(bundle.cpu_counter.cumulative_uj, bundle.cpu_counter.wrap_uj)
    if anomalous.any():
        flags.append(f"{int(anomalous.sum())} anomalous counter intervals dropped")

    return RunAnalysis(
        run_id=m.run_id,
        config_label=m.config.config_label,
        host_freq=m.config.host_freq,
        problem_size=m.config.problem_size,
        n_devices=len(bundle.mic),
        exec_time_reported=m.exec_time_reported,
        exec_window_s=t_exec,
        phases=phases,
        p_cpu_avg=execution["cpu"].avg_power_w,
        p_mic_avg_per_device=p_mic,
        p_mic_total=float(sum(p_mic)),
        p_system_exec=execution["system"].avg_power_w,
        e_cpu=e_cpu,
        e_mic=e_mic,
        e_total=e_cpu + e_mic,
        overhead_w=overhead,
        flags=flags,
    )


def write_analysis(analysis: RunAnalysis, directory) -> tuple:
    """Write analysis.json and analysis.csv (one row per phase x source)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    json_path = directory / "analysis.json"
    json_path.write_text(json.dumps(analysis.to_dict(), indent=2) + "\n")
    csv_path = directory / "analysis.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run_id", "phase", "source", "avg_power_w", "energy_j",
                         "duration_s", "n_samples"])
        for p in analysis.phases:
            for name in sorted(p.sources):
                s = p.sources[name]
                writer.writerow([analysis.run_id, p.phase.value, name, repr(s.avg_power_w),
                                 repr(s.energy_j), repr(s.duration_s), s.n_samples])
    return json_path, csv_path
