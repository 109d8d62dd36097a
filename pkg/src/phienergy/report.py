"""
Batch operations over a run index: analyze every run, fit each configuration
group, and emit tabular summaries and plot-ready CSV.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analyze import analyze_run
from .ingest import load_bundle, read_index
from .model import (
    SweepPoint,
    average_replicates,
    boundedness,
    fit_model,
    model_to_dict,
    predict_time,
    predict_power,
)
from .optimize import energy_table, optimal_pstate
from .types import DEFAULT_PSTATES, PStateTable

log = logging.getLogger(__name__)

FREQUENCY_SWEEP = "frequency_sweep"
STRONG_SCALING = "strong_scaling"


def analyze_index(index_path, table: PStateTable = DEFAULT_PSTATES):
    """Load and analyze every run in an index.

    Returns ``(analyses, errors)``; `errors` maps run_id to a message for
    runs that could not be loaded or analyzed.
    """
    analyses, errors = [], {}
    for entry in read_index(index_path):
        try:
            analyses.append(analyze_run(load_bundle(entry["manifest_path"], table)))
        except (OSError, ValueError) as exc:
            log.error("%s: %s", entry["run_id"], exc)
            errors[entry["run_id"]] = str(exc)
    return analyses, errors


def sweep_points(analyses) -> dict:
    """Group analyses by config_label into model-fitting points."""
    groups = defaultdict(list)
    for a in analyses:
        groups[a.config_label].append(
            SweepPoint(f=a.host_freq, T=a.exec_time_reported, P_cpu=a.p_cpu_avg,
                       P_mic=a.p_mic_total))
    return dict(groups)


@dataclass(frozen=True)
class ReportRow:
    config_label: str
    t_on: float
    t_off: float
    ratio: float
    k: float
    P_s: float
    r2_time: float
    r2_power: float
    f_opt_pstate: float
    e_at_fopt: float

    FIELDS = ("config_label", "t_on", "t_off", "ratio", "k", "P_s", "r2_time", "r2_power",
              "f_opt_pstate", "e_at_fopt")


def fit_groups(analyses, n_cores: int, table: PStateTable = DEFAULT_PSTATES,
               include_mic: bool = False, exclude_fmax: bool = False):
    """Fit every config_label group.

    Returns ``(results, errors)``: `results` is a list of
    ``(model, optimization, points)`` sorted by label, `errors` maps the
    labels that failed to a message.
    """
    results, errors = [], {}
    for label, points in sorted(sweep_points(analyses).items()):
        try:
            m = fit_model(points, n_cores, table.f_max, config_label=label,
                          exclude_fmax=exclude_fmax)
            opt = optimal_pstate(m, table, include_mic=include_mic)
        except ValueError as exc:
            errors[label] = str(exc)
            continue
        results.append((m, opt, points))
    return results, errors


def report_row(m, opt) -> ReportRow:
    ratio, _ = boundedness(m.t_on, m.t_off)
    return ReportRow(m.config_label, m.t_on, m.t_off, ratio, m.k, m.P_s, m.r2_time,
                     m.r2_power, opt.f_pstate, opt.e_at_pstate)


def format_table(rows) -> str:
    """Human-readable table, two decimals."""
    head = ["Config", "t_on", "t_off", "t_off/t_on", "k", "P_s", "R2(T)", "R2(P)",
            "f_opt", "E(f_opt)"]
    lines = ["  ".join(f"{h:>10}" for h in head)]
    for r in rows:
        vals = [r.t_on, r.t_off, r.ratio, r.k, r.P_s, r.r2_time, r.r2_power,
                r.f_opt_pstate, r.e_at_fopt]
        lines.append(f"{r.config_label:>10}  " + "  ".join(f"{v:>10.2f}" for v in vals))
    return "\n".join(lines)


def _timestamp(enabled: bool) -> dict:
    if not enabled:
        return {}
    return {"generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _jsonable(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


def fit_document(results, errors, table, include_mic=False, timestamp=True) -> dict:
    groups = []
    for m, opt, points in results:
        reps = average_replicates(points)
        residuals = [
            {"f": float(f), "n": int(n), "T": float(T), "T_residual": float(T - predict_time(m, f)),
             "P_cpu": float(P), "P_residual": float(P - predict_power(m, f)),
             "T_std": float(ts), "P_cpu_std": float(ps)}
            for f, n, T, P, ts, ps in zip(reps.f, reps.counts, reps.T, reps.P_cpu,
                                          reps.T_std, reps.P_cpu_std)
        ]
        groups.append({"model": model_to_dict(m), "optimization": opt.to_dict(),
                       "points": residuals})
    return {"pstates": list(table.levels), "include_mic_power": include_mic,
            "groups": groups, "errors": errors, **_timestamp(timestamp)}


def write_fit(results, errors, out_dir, table=DEFAULT_PSTATES, include_mic=False,
              timestamp=True) -> tuple:
    """Write fit.json and fit.csv into `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = fit_document(results, errors, table, include_mic, timestamp)
    json_path = out_dir / "fit.json"
    json_path.write_text(json.dumps(doc, indent=2) + "\n")
    csv_path = out_dir / "fit.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ReportRow.FIELDS)
        for m, opt, _ in results:
            row = report_row(m, opt)
            w.writerow([row.config_label] + [repr(getattr(row, k)) for k in ReportRow.FIELDS[1:]])
    return json_path, csv_path


def optimize_document(m, table=DEFAULT_PSTATES, include_mic=False, timestamp=True) -> dict:
    opt = optimal_pstate(m, table, include_mic=include_mic)
    return {"config_label": m.config_label, **opt.to_dict(),
            "energy_by_pstate": energy_table(m, table, include_mic), **_timestamp(timestamp)}


def plot_rows(analyses, mode: str = FREQUENCY_SWEEP) -> list:
    """Replicate-averaged (x, e_total, p_avg) rows per configuration.

    x is the host frequency for a frequency sweep and the problem size for
    strong scaling. Rows are sorted by label, then x.
    """
    if mode not in (FREQUENCY_SWEEP, STRONG_SCALING):
        raise ValueError(f"unknown report mode {mode!r}")
    if len(analyses) < 2:
        raise ValueError("report needs at least 2 analyses")
    key = "host_freq" if mode == FREQUENCY_SWEEP else "problem_size"
    groups = defaultdict(list)
    for a in analyses:
        groups[(a.config_label, getattr(a, key))].append(a)
    rows = []
    for (label, x), runs in sorted(groups.items()):
        e = np.array([a.e_total for a in runs])
        p = np.array([a.p_avg for a in runs])
        rows.append({"config_label": label, key: x, "e_total": float(e.mean()),
                     "p_avg": float(p.mean()), "e_std": float(e.std(ddof=1)) if len(runs) > 1 else 0.0,
                     "n_runs": len(runs),
                     "flags": ";".join(sorted({fl for a in runs for fl in a.flags}))})
    return rows


def write_plot_csv(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("no rows to write")
    fields = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (r[k] for k in fields)])
    return path
