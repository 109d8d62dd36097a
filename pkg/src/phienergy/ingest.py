"""
Readers and writers for run manifests and the three trace formats.

Every trace file is a headered CSV: ``#key=value`` lines followed by data
rows. Floats are written with ``repr`` so a write/read cycle is bit-exact.

    *.system.csv   # source=system_meter            t_ms,watts
    *.cpu.csv      # source=cpu_counter, wrap_uj=N  t_ms,cumulative_uj
    *.micN.csv     # source=mic_device, device_index=N  t_ms,pcie_w,c2x3_w,c2x4_w
"""
from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .types import (
    DEFAULT_PSTATES,
    DEFAULT_WRAP_UJ,
    TIMESTAMP_FIELDS,
    CounterTrace,
    MicTrace,
    RunConfig,
    RunManifest,
    SystemTrace,
    TraceBundle,
    cadence_warnings,
    validate_manifest,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class TraceFormatError(ValueError):
    pass


class ManifestError(ValueError):
    pass


def _lines(stream):
    if isinstance(stream, str):
        return stream.splitlines()
    return stream


def _split(stream, source):
    """Separate header key/values from data rows.

    Returns ``(header, rows)`` where rows are ``(lineno, text)`` pairs.
    """
    header = {}
    rows = []
    for lineno, raw in enumerate(_lines(stream), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                header[key.strip()] = value.strip()
            continue
        rows.append((lineno, line))

    version = header.get("schema_version")
    if version is not None and version != str(SCHEMA_VERSION):
        raise TraceFormatError(f"unsupported schema_version {version}")
    declared = header.get("source")
    if declared is not None and declared != source:
        raise TraceFormatError(f"expected source={source}, file declares source={declared}")
    return header, rows


def _check_sorted(t_ms):
    if len(t_ms) > 1 and np.any(np.diff(t_ms) <= 0):
        raise TraceFormatError("unsorted trace")


def parse_system_trace(stream) -> SystemTrace:
    """Parse a wall-meter trace.

    The meter drops and garbles readings, so malformed rows are skipped and
    recorded in ``trace.warnings`` rather than raising.
    """
    _, rows = _split(stream, "system_meter")
    t_ms, watts, warnings = [], [], []
    for lineno, line in rows:
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError("expected 2 fields")
            t, w = int(parts[0]), float(parts[1])
            if not np.isfinite(w) or w < 0:
                raise ValueError("power must be finite and >= 0")
        except ValueError as exc:
            warnings.append(f"line {lineno}: skipped {line!r} ({exc})")
            continue
        t_ms.append(t)
        watts.append(w)
    if not t_ms:
        raise TraceFormatError("empty trace")
    _check_sorted(t_ms)
    for w in warnings:
        log.warning("system trace %s", w)
    return SystemTrace(t_ms, watts, warnings=tuple(warnings))


def parse_cpu_counter_trace(stream) -> CounterTrace:
    """Parse a cumulative energy counter trace. Values are kept raw (wrapped)."""
    header, rows = _split(stream, "cpu_counter")
    try:
        wrap_uj = int(header.get("wrap_uj", DEFAULT_WRAP_UJ))
    except ValueError:
        raise TraceFormatError(f"bad wrap_uj {header['wrap_uj']!r}") from None
    if wrap_uj <= 0:
        raise TraceFormatError("wrap_uj must be > 0")
    t_ms, counts = [], []
    for lineno, line in rows:
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(f"line {lineno}: expected 2 fields")
        try:
            t, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise TraceFormatError(f"line {lineno}: malformed row {line!r}") from None
        if c < 0:
            raise TraceFormatError(f"line {lineno}: negative counter value")
        if c >= wrap_uj:
            raise TraceFormatError(f"line {lineno}: counter exceeds declared wrap")
        t_ms.append(t)
        counts.append(c)
    if not t_ms:
        raise TraceFormatError("empty trace")
    _check_sorted(t_ms)
    return CounterTrace(t_ms, counts, wrap_uj=wrap_uj)


def parse_mic_trace(stream) -> MicTrace:
    header, rows = _split(stream, "mic_device")
    device_index = int(header.get("device_index", 0))
    cols = [[], [], [], []]
    for lineno, line in rows:
        parts = line.split(",")
        if len(parts) != 4:
            raise TraceFormatError(f"line {lineno}: expected 4 fields")
        try:
            t = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise TraceFormatError(f"line {lineno}: malformed row {line!r}") from None
        if any(not np.isfinite(v) for v in values):
            raise TraceFormatError(f"line {lineno}: non-finite connector power")
        if any(v < 0 for v in values):
            raise TraceFormatError(f"line {lineno}: negative connector power")
        cols[0].append(t)
        for col, v in zip(cols[1:], values):
            col.append(v)
    if not cols[0]:
        raise TraceFormatError("empty trace")
    _check_sorted(cols[0])
    return MicTrace(device_index, *cols)


def format_system_trace(trace: SystemTrace) -> str:
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n# source=system_meter\n# columns=t_ms,watts\n")
    for t, w in zip(trace.t_ms.tolist(), trace.watts.tolist()):
        out.write(f"{t},{w!r}\n")
    return out.getvalue()


def format_cpu_counter_trace(trace: CounterTrace) -> str:
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n# source=cpu_counter\n"
              f"# wrap_uj={trace.wrap_uj}\n# columns=t_ms,cumulative_uj\n")
    for t, c in zip(trace.t_ms.tolist(), trace.cumulative_uj.tolist()):
        out.write(f"{t},{c}\n")
    return out.getvalue()


def format_mic_trace(trace: MicTrace) -> str:
    out = io.StringIO()
    out.write(f"# schema_version={SCHEMA_VERSION}\n# source=mic_device\n"
              f"# device_index={trace.device_index}\n# columns=t_ms,pcie_w,c2x3_w,c2x4_w\n")
    for t, a, b, c in zip(trace.t_ms.tolist(), trace.pcie_w.tolist(),
                          trace.c2x3_w.tolist(), trace.c2x4_w.tolist()):
        out.write(f"{t},{a!r},{b!r},{c!r}\n")
    return out.getvalue()


# -- manifests ---------------------------------------------------------------

def manifest_to_dict(m: RunManifest) -> dict:
    config = asdict(m.config)
    config["mic_exec_mode"] = m.config.mic_exec_mode.value
    d = {"schema_version": SCHEMA_VERSION, "run_id": m.run_id, "config": config}
    for name in TIMESTAMP_FIELDS:
        d[name] = getattr(m, name)
    d["exec_time_reported"] = m.exec_time_reported
    d["trace_paths"] = m.trace_paths
    if m.synthetic is not None:
        d["synthetic"] = m.synthetic
    return d


def manifest_from_dict(d: dict) -> RunManifest:
    try:
        config = RunConfig(**d["config"])
        return RunManifest(
            run_id=str(d["run_id"]),
            config=config,
            exec_time_reported=float(d["exec_time_reported"]),
            trace_paths=dict(d.get("trace_paths", {})),
            synthetic=d.get("synthetic"),
            **{name: int(d[name]) for name in TIMESTAMP_FIELDS},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc


def write_manifest(m: RunManifest, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest_to_dict(m), indent=2) + "\n")
    return path


def read_manifest(path) -> RunManifest:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path) as fh:
        return manifest_from_dict(json.load(fh))


# -- bundles -----------------------------------------------------------------

def _read(path: Path, parser):
    if not path.is_file():
        raise FileNotFoundError(f"trace file not found: {path}")
    with open(path) as fh:
        return parser(fh)


def load_bundle(manifest_path, table=DEFAULT_PSTATES) -> TraceBundle:
    """Load a manifest and every trace it references.

    Manifest violations of severity "error" raise :class:`ManifestError`;
    warnings are logged.
    """
    manifest_path = Path(manifest_path)
    m = read_manifest(manifest_path)
    problems = validate_manifest(m, table)
    errors = [str(v) for v in problems if v.severity == "error"]
    if errors:
        raise ManifestError(f"{manifest_path}: " + "; ".join(errors))
    for v in problems:
        log.warning("%s: %s", manifest_path, v)

    base = manifest_path.parent
    paths = m.trace_paths
    for key in ("system", "cpu_counter"):
        if key not in paths:
            raise ManifestError(f"{manifest_path}: trace_paths lacks '{key}'")
    system = _read(base / paths["system"], parse_system_trace)
    cpu = _read(base / paths["cpu_counter"], parse_cpu_counter_trace)
    mic = [_read(base / p, parse_mic_trace) for p in paths.get("mic", [])]
    if len(mic) != m.config.n_xeon_phi:
        raise ManifestError(f"{manifest_path}: {len(mic)} MIC traces for "
                            f"n_xeon_phi={m.config.n_xeon_phi}")
    return TraceBundle(m, system, cpu, tuple(mic))


def bundle_warnings(bundle: TraceBundle) -> list:
    """Collect parse, cadence and manifest warnings for a bundle."""
    out = [str(v) for v in validate_manifest(bundle.manifest) if v.severity == "warning"]
    out.extend(bundle.system.warnings)
    out.extend(cadence_warnings(bundle.system.t_ms, "system"))
    out.extend(cadence_warnings(bundle.cpu_counter.t_ms, "cpu"))
    for trace in bundle.mic:
        out.extend(cadence_warnings(trace.t_ms, f"mic{trace.device_index}"))
    return out


def write_bundle(bundle: TraceBundle, directory) -> Path:
    """Write a bundle as run.json plus trace files; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = bundle.manifest.run_id
    paths = {"system": f"{stem}.system.csv", "cpu_counter": f"{stem}.cpu.csv",
             "mic": [f"{stem}.mic{t.device_index}.csv" for t in bundle.mic]}
    (directory / paths["system"]).write_text(format_system_trace(bundle.system))
    (directory / paths["cpu_counter"]).write_text(format_cpu_counter_trace(bundle.cpu_counter))
    for trace, name in zip(bundle.mic, paths["mic"]):
        (directory / name).write_text(format_mic_trace(trace))
    manifest = replace(bundle.manifest, trace_paths=paths)
    return write_manifest(manifest, directory / "run.json")


# -- run index ---------------------------------------------------------------

def read_index(path) -> list:
    """Return index entries with manifest paths resolved against the index file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"index not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    entries = []
    for entry in doc.get("runs", []):
        entry = dict(entry)
        entry["manifest_path"] = path.parent / entry["manifest"]
        entries.append(entry)
    return entries


def write_index(entries, path, merge=True) -> Path:
    """Write ``index.json``. With ``merge``, entries already present are kept
    unless a new entry has the same run_id."""
    path = Path(path)
    existing = []
    if merge and path.is_file():
        with open(path) as fh:
            existing = json.load(fh).get("runs", [])
    by_id = {e["run_id"]: e for e in existing}
    for e in entries:
        e = {k: v for k, v in e.items() if k != "manifest_path"}
        if os.path.isabs(e["manifest"]):
            e["manifest"] = os.path.relpath(e["manifest"], path.parent)
        by_id[e["run_id"]] = e
    runs = sorted(by_id.values(), key=lambda e: (e.get("config_label", ""),
                                                 e.get("host_freq", 0.0),
                                                 e.get("problem_size", 0),
                                                 e.get("replicate", 0),
                                                 e["run_id"]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "runs": runs}, indent=2) + "\n")
    return path
