"""
Synthetic experiment runs generated from known model parameters.

Each run follows the measurement protocol: the wall meter starts at t0,
the CPU and coprocessor readers start 15 s later (t1), the application
starts after another 15 s (t2) and runs for the modeled time, readers stop
20 s after it ends (t4) and the machine cools for 60 s (t5). Output files
use the formats read by :mod:`phienergy.ingest`.
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .ingest import read_manifest, write_bundle, write_index
from .types import (
    DEFAULT_PSTATES,
    DEFAULT_WRAP_UJ,
    CounterTrace,
    ExecMode,
    MicTrace,
    PStateTable,
    RunConfig,
    RunManifest,
    SystemTrace,
    TraceBundle,
)

BASELINE_MS = 15_000
INSTRUMENTED_MS = 15_000
POST_MS = 20_000
COOLDOWN_MS = 60_000
CPU_PERIOD_MS = 50
MIC_PERIOD_MS = 50
SYSTEM_PERIOD_MS = 1000
DEFAULT_START_MS = 1_420_070_400_000
EARLY_EXIT_FRACTION = 0.6


@dataclass(frozen=True)
class GroundTruth:
    """Parameters a synthetic run is generated from.

    `connector_split` and `mic_idle_fraction` are arbitrary fixed choices;
    only the device total is physically meaningful.
    """

    t_on: float
    t_off: float
    k: float
    P_s: float
    n_cores: int = 16
    f_max: float = 2.01
    p_mic_per_device: float = 200.0
    n_devices: int = 0
    idle_system_w: float = 150.0
    noise_rel: float = 0.0
    seed: int = 0
    mic_idle_fraction: float = 0.3
    connector_split: tuple = (0.30, 0.35, 0.35)
    reader_overhead_w: float = 0.0
    counter_offset_uj: int = 0
    wrap_uj: int = DEFAULT_WRAP_UJ

    def __post_init__(self):
        for name in ("t_on", "t_off", "k", "P_s", "p_mic_per_device", "idle_system_w",
                     "noise_rel", "mic_idle_fraction", "reader_overhead_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_cores < 1 or self.n_devices < 0 or self.f_max <= 0:
            raise ValueError("need n_cores >= 1, n_devices >= 0, f_max > 0")
        if not np.isclose(sum(self.connector_split), 1.0):
            raise ValueError("connector_split must sum to 1")
        object.__setattr__(self, "connector_split", tuple(self.connector_split))

    def exec_time(self, f: float) -> float:
        return self.t_on * self.f_max / f + self.t_off

    def cpu_power(self, f: float) -> float:
        return self.P_s + self.k * self.n_cores * f ** 3


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def _default_label(gt: GroundTruth) -> str:
    return f"MIC {gt.n_devices}" if gt.n_devices else "Host 1"


def _noise(rng, sigma, n):
    if sigma == 0:
        return np.ones(n)
    return np.clip(1.0 + sigma * rng.standard_normal(n), 0.0, None)


def build_bundle(gt: GroundTruth, f: float, *, table: PStateTable = DEFAULT_PSTATES,
                 replicate: int = 0, config_label: str | None = None,
                 app_name: str = "synthetic", problem_size: int = 60,
                 truncate: float | None = None, start_ms: int = DEFAULT_START_MS,
                 run_id: str | None = None) -> TraceBundle:
    """Generate one run in memory.

    `truncate` cuts the execution window to that fraction of the run time
    while the reported time stays the full run time (an early exit).
    """
    if f not in table:
        raise ValueError(f"{f} GHz is not a P-state level")
    f = min(table.levels, key=lambda lvl: abs(lvl - f))
    label = config_label or _default_label(gt)
    rng = np.random.default_rng([gt.seed, int(round(f * 1000)), replicate, problem_size])

    t_model = gt.exec_time(f)
    t_actual = t_model * float(_noise(rng, gt.noise_rel, 1)[0])
    exec_ms = int(round(t_actual * 1000 * (truncate if truncate else 1.0)))
    if exec_ms < 2 * CPU_PERIOD_MS:
        raise ValueError("execution window too short to sample")

    t0 = int(start_ms)
    t1 = t0 + BASELINE_MS
    t2 = t1 + INSTRUMENTED_MS
    t3 = t2 + exec_ms
    t4 = t3 + POST_MS
    t5 = t4 + COOLDOWN_MS
    p_active, p_idle = gt.cpu_power(f), gt.P_s

    def running(t):
        return (t >= t2) & (t <= t3)

    # CPU counter: integrate the piecewise-constant package power per interval
    t_cpu = np.arange(t1, t4 + 1, CPU_PERIOD_MS, dtype=np.int64)
    lo, hi = t_cpu[:-1], t_cpu[1:]
    active_ms = np.clip(np.minimum(hi, t3) - np.maximum(lo, t2), 0, None)
    scale = _noise(rng, gt.noise_rel, len(lo))
    interval_uj = (active_ms * p_active + (hi - lo - active_ms) * p_idle) * scale * 1000.0
    cum = np.concatenate([[0.0], np.cumsum(interval_uj)])
    counts = (gt.counter_offset_uj + np.rint(cum).astype(np.int64)) % gt.wrap_uj
    cpu = CounterTrace(t_cpu, counts, wrap_uj=gt.wrap_uj)

    mic = []
    t_mic = np.arange(t1, t4 + 1, MIC_PERIOD_MS, dtype=np.int64)
    for dev in range(gt.n_devices):
        level = np.where(running(t_mic), 1.0, gt.mic_idle_fraction)
        total = gt.p_mic_per_device * level * _noise(rng, gt.noise_rel, len(t_mic))
        a, b, c = (total * share for share in gt.connector_split)
        mic.append(MicTrace(dev, t_mic, a, b, c))

    t_sys = np.arange(t0, t4 + 1, SYSTEM_PERIOD_MS, dtype=np.int64)
    on = running(t_sys)
    watts = (gt.idle_system_w
             + np.where(on, p_active, p_idle)
             + gt.n_devices * gt.p_mic_per_device * np.where(on, 1.0, gt.mic_idle_fraction)
             + np.where(t_sys >= t1, gt.reader_overhead_w, 0.0))
    watts = watts * _noise(rng, gt.noise_rel, len(t_sys))
    system = SystemTrace(t_sys, watts)

    config = RunConfig(
        problem_size=problem_size, n_nodes=1, n_mpi_tasks=1 + gt.n_devices,
        n_xeon_phi=gt.n_devices, mic_affinity="compact",
        mic_exec_mode=ExecMode.SYMMETRIC if gt.n_devices else ExecMode.HOST_ONLY,
        host_freq=f, n_host_omp=gt.n_cores, n_mic_omp=236 if gt.n_devices else 0,
        app_name=app_name, config_label=label,
    )
    synthetic = asdict(gt)
    synthetic["connector_split"] = list(gt.connector_split)
    synthetic.update(f=f, replicate=replicate, truncate=truncate, exec_time_model=t_model,
                     p_cpu_model=p_active, e_cpu_model=t_model * p_active)
    if run_id is None:
        run_id = f"{_slug(app_name)}-{_slug(label)}-s{problem_size}-f{f:.2f}-r{replicate}"
    manifest = RunManifest(
        run_id=run_id, config=config,
        t0_system_meter_start=t0, t1_component_readers_start=t1, t2_app_start=t2,
        t3_app_end=t3, t4_readers_stop=t4, t5_cooldown_end=t5,
        exec_time_reported=t_actual, synthetic=synthetic,
    )
    return TraceBundle(manifest, system, cpu, tuple(mic))


def synth_run(gt: GroundTruth, f: float, out_dir, **kwargs) -> RunManifest:
    """Generate one run and write it to ``out_dir/<run_id>/``."""
    bundle = build_bundle(gt, f, **kwargs)
    path = write_bundle(bundle, Path(out_dir) / bundle.manifest.run_id)
    return read_manifest(path)


def _entry(m: RunManifest, replicate: int) -> dict:
    return {"run_id": m.run_id, "manifest": f"{m.run_id}/run.json",
            "config_label": m.config.config_label, "app_name": m.config.app_name,
            "host_freq": m.config.host_freq, "problem_size": m.config.problem_size,
            "replicate": replicate}


def synth_sweep(gt: GroundTruth, table: PStateTable = DEFAULT_PSTATES, replicates: int = 1,
                out_dir=".", *, config_label: str | None = None, app_name: str = "synthetic",
                problem_size: int = 60, merge_index: bool = True) -> list:
    """One run per (level, replicate); appends the runs to ``out_dir/index.json``.

    Returns the index entries of the new runs.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    out_dir = Path(out_dir)
    entries = []
    for f in table.levels:
        for r in range(replicates):
            m = synth_run(gt, f, out_dir, table=table, replicate=r, config_label=config_label,
                          app_name=app_name, problem_size=problem_size)
            entries.append(_entry(m, r))
    write_index(entries, out_dir / "index.json", merge=merge_index)
    return entries


def synth_strong_scaling(gts: dict, out_dir=".", *, f: float | None = None,
                         table: PStateTable = DEFAULT_PSTATES, config_label: str | None = None,
                         app_name: str = "synthetic", truncate_sizes=(),
                         merge_index: bool = True) -> list:
    """One run per problem size at a fixed frequency (default f_max).

    `gts` maps problem size to its GroundTruth. Sizes in `truncate_sizes`
    exit early at 60% of their run time.
    """
    if len(gts) < 2:
        raise ValueError("need at least 2 problem sizes")
    out_dir = Path(out_dir)
    f = table.f_max if f is None else f
    entries = []
    for size in sorted(gts):
        m = synth_run(gts[size], f, out_dir, table=table, config_label=config_label,
                      app_name=app_name, problem_size=size,
                      truncate=EARLY_EXIT_FRACTION if size in truncate_sizes else None)
        entries.append(_entry(m, 0))
    write_index(entries, out_dir / "index.json", merge=merge_index)
    return entries
