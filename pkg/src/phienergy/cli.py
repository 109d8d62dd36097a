"""
Command-line entry point.

    phienergy synth     generate synthetic runs and an index
    phienergy ingest    load and validate runs
    phienergy analyze   per-run phase/energy analysis
    phienergy fit       fit each configuration group over a frequency sweep
    phienergy predict   model time/power/energy at one frequency
    phienergy optimize  energy-optimal P-state for a fitted model
    phienergy report    plot-ready energy/power CSV

Machine-readable results go to stdout as one JSON document; diagnostics go
to stderr. Exit status is 0 on success, 1 on partial or validation failure
and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .analyze import analyze_run, write_analysis
from .ingest import bundle_warnings, load_bundle, read_index
from .model import model_from_dict, predict_energy, predict_power, predict_time
from .report import (
    FREQUENCY_SWEEP,
    STRONG_SCALING,
    analyze_index,
    fit_groups,
    format_table,
    optimize_document,
    plot_rows,
    report_row,
    write_fit,
    write_plot_csv,
)
from .synth import GroundTruth, synth_strong_scaling, synth_sweep
from .types import DEFAULT_PSTATES, PHYSICAL_CORES, PStateTable

log = logging.getLogger("phienergy")


class UsageError(Exception):
    pass


def _emit(doc):
    json.dump(doc, sys.stdout, indent=2, default=_default)
    sys.stdout.write("\n")


def _default(o):
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x):
    return x if math.isfinite(x) else None


def _table(args) -> PStateTable:
    if not getattr(args, "pstates", None):
        return DEFAULT_PSTATES
    try:
        return PStateTable.from_iterable(float(x) for x in args.pstates.split(","))
    except ValueError as exc:
        raise UsageError(f"--pstates: {exc}") from None


def _manifests(args) -> list:
    paths = [Path(p) for p in getattr(args, "manifests", None) or []]
    if args.index:
        paths += [e["manifest_path"] for e in read_index(args.index)]
    if not paths:
        raise UsageError("give --index or at least one manifest path")
    return paths


def _n_cores(args) -> int:
    if args.n_cores is not None:
        if args.n_cores < 1:
            raise UsageError("--n-cores must be >= 1")
        return args.n_cores
    if args.paper_platform:
        return PHYSICAL_CORES
    raise UsageError("--n-cores is required (or pass --paper-platform for 16)")


def _load_fit(args):
    with open(args.fit) as fh:
        doc = json.load(fh)
    groups = [g["model"] for g in doc.get("groups", [])] if "groups" in doc else [doc]
    if args.config:
        groups = [g for g in groups if g.get("config_label") == args.config]
    if len(groups) != 1:
        labels = [g.get("config_label") for g in doc.get("groups", [])]
        raise UsageError(f"select one configuration with --config (available: {labels})")
    return model_from_dict(groups[0])


def cmd_synth(args) -> int:
    table = _table(args)
    if args.gt_file:
        with open(args.gt_file) as fh:
            gt_doc = json.load(fh)
    else:
        missing = [n for n in ("t_on", "t_off", "k", "p_s") if getattr(args, n) is None]
        if missing:
            raise UsageError("synth needs --gt-file or all of --t-on --t-off --k --p-s")
        gt_doc = {"t_on": args.t_on, "t_off": args.t_off, "k": args.k, "P_s": args.p_s}
    common = {"seed": args.seed, "noise_rel": args.noise, "n_devices": args.devices,
              "f_max": table.f_max}
    if args.n_cores is not None:
        common["n_cores"] = args.n_cores
    kwargs = {"config_label": args.label, "app_name": args.app}
    try:
        if "sizes" in gt_doc:
            gts = {int(size): GroundTruth(**{**common, **params})
                   for size, params in gt_doc["sizes"].items()}
            entries = synth_strong_scaling(gts, args.out, table=table,
                                           truncate_sizes=set(gt_doc.get("truncate_sizes", [])),
                                           **kwargs)
        else:
            gt = GroundTruth(**{**common, **gt_doc})
            entries = synth_sweep(gt, table, args.replicates, args.out,
                                  problem_size=args.problem_size, **kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    _emit({"index": str(Path(args.out) / "index.json"), "runs": entries})
    return 0


def cmd_ingest(args) -> int:
    table = _table(args)
    runs, status = [], 0
    for path in _manifests(args):
        try:
            b = load_bundle(path, table)
        except (OSError, ValueError) as exc:
            runs.append({"manifest": str(path), "ok": False, "error": str(exc)})
            status = 1
            continue
        runs.append({"manifest": str(path), "ok": True, "run_id": b.manifest.run_id,
                     "samples": {"system": len(b.system), "cpu_counter": len(b.cpu_counter),
                                 "mic": [len(t) for t in b.mic]},
                     "warnings": bundle_warnings(b)})
    _emit({"runs": runs})
    return status


def cmd_analyze(args) -> int:
    table = _table(args)
    out, status = [], 0
    for path in _manifests(args):
        try:
            a = analyze_run(load_bundle(path, table))
        except (OSError, ValueError) as exc:
            log.error("%s: %s", path, exc)
            out.append({"manifest": str(path), "ok": False, "error": str(exc)})
            status = 1
            continue
        if args.out:
            write_analysis(a, Path(args.out) / a.run_id)
        out.append({"manifest": str(path), "ok": True, "run_id": a.run_id,
                    "e_cpu": a.e_cpu, "e_mic": a.e_mic, "e_total": a.e_total,
                    "p_cpu_avg": a.p_cpu_avg, "p_mic_total": a.p_mic_total,
                    "overhead_w": a.overhead_w, "flags": a.flags})
    _emit({"runs": out})
    return status


def cmd_fit(args) -> int:
    if not args.index:
        raise UsageError("fit needs --index")
    n_cores = _n_cores(args)
    table = _table(args)
    analyses, run_errors = analyze_index(args.index, table)
    results, errors = fit_groups(analyses, n_cores, table, include_mic=args.include_mic_power,
                                 exclude_fmax=args.exclude_fmax)
    rows = [report_row(m, opt) for m, opt, _ in results]
    if args.out:
        write_fit(results, errors, args.out, table, args.include_mic_power,
                  timestamp=not args.no_timestamp)
    if rows:
        print(format_table(rows), file=sys.stderr)
    for label, msg in errors.items():
        log.error("group %s: %s", label, msg)
    _emit({"rows": [{k: _finite(v) if isinstance(v, float) else v
                     for k, v in vars(r).items()} for r in rows],
           "errors": errors, "run_errors": run_errors})
    return 1 if errors or run_errors else 0


def cmd_predict(args) -> int:
    m = _load_fit(args)
    f = args.freq
    if f is None or f <= 0:
        raise UsageError("--freq must be a positive frequency in GHz")
    e = predict_energy(m, f)
    _emit({"config_label": m.config_label, "f": f, "time_s": predict_time(m, f),
           "power_w": predict_power(m, f), "e_cpu": e.e_cpu, "e_mic": e.e_mic,
           "e_total": e.e_total})
    return 0


def cmd_optimize(args) -> int:
    m = _load_fit(args)
    doc = optimize_document(m, _table(args), args.include_mic_power,
                            timestamp=not args.no_timestamp)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "optimize.json").write_text(json.dumps(doc, indent=2, default=_default) + "\n")
    _emit(doc)
    return 0


def cmd_report(args) -> int:
    if not args.index:
        raise UsageError("report needs --index")
    analyses, run_errors = analyze_index(args.index, _table(args))
    try:
        rows = plot_rows(analyses, args.mode)
    except ValueError as exc:
        log.error("%s", exc)
        _emit({"rows": [], "run_errors": run_errors, "error": str(exc)})
        return 1
    if args.out:
        write_plot_csv(rows, Path(args.out) / f"{args.mode}.csv")
    _emit({"mode": args.mode, "rows": rows, "run_errors": run_errors})
    return 1 if run_errors else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phienergy", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, index=True):
        if index:
            sp.add_argument("--index", help="index.json listing runs")
        sp.add_argument("--pstates", help="comma-separated P-state levels in GHz")
        sp.add_argument("--no-timestamp", action="store_true",
                        help="omit generated_at from outputs")

    s = sub.add_parser("synth", help="generate synthetic runs")
    common(s, index=False)
    s.add_argument("--out", required=True)
    s.add_argument("--gt-file", help="JSON ground truth; a 'sizes' map gives a strong-scaling set")
    s.add_argument("--t-on", type=float)
    s.add_argument("--t-off", type=float)
    s.add_argument("--k", type=float)
    s.add_argument("--p-s", type=float)
    s.add_argument("--n-cores", type=int)
    s.add_argument("--devices", type=int, default=0)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--problem-size", type=int, default=60)
    s.add_argument("--label")
    s.add_argument("--app", default="synthetic")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0, help="relative sigma")
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("ingest", cmd_ingest, "load and validate runs"),
                                 ("analyze", cmd_analyze, "analyze runs")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("manifests", nargs="*")
        if name == "analyze":
            sp.add_argument("--out")
        sp.set_defaults(func=func)

    f = sub.add_parser("fit", help="fit each configuration group")
    common(f)
    f.add_argument("--out")
    f.add_argument("--n-cores", type=int)
    f.add_argument("--paper-platform", action="store_true",
                   help="default --n-cores to 16")
    f.add_argument("--include-mic-power", action="store_true")
    f.add_argument("--exclude-fmax", action="store_true",
                   help="leave the f_max point out of the time regression")
    f.set_defaults(func=cmd_fit)

    for name, func in (("predict", cmd_predict), ("optimize", cmd_optimize)):
        sp = sub.add_parser(name)
        common(sp, index=False)
        sp.add_argument("--fit", required=True, help="fit.json")
        sp.add_argument("--config", help="config_label to select from fit.json")
        if name == "predict":
            sp.add_argument("--freq", type=float, required=True)
        else:
            sp.add_argument("--include-mic-power", action="store_true")
            sp.add_argument("--out")
        sp.set_defaults(func=func)

    r = sub.add_parser("report", help="plot-ready CSV")
    common(r)
    r.add_argument("--mode", choices=(FREQUENCY_SWEEP, STRONG_SCALING), default=FREQUENCY_SWEEP)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"phienergy {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"phienergy {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
