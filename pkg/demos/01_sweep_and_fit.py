"""
Fitting time and power models from a frequency sweep
====================================================

Generate a synthetic sweep from known parameters, analyze every run and fit
the two models back. With no noise the fit lands on the inputs.
"""
import tempfile
from pathlib import Path

from phienergy import GroundTruth, DEFAULT_PSTATES, synth_sweep
from phienergy.report import analyze_index, fit_groups, format_table, report_row

# a host-only CoMD-like workload: T(f) = 64.19 * f_max/f + 0.61
gt = GroundTruth(t_on=64.19, t_off=0.61, k=0.34, P_s=23.09)

out = Path(tempfile.mkdtemp(prefix="phienergy-sweep-"))
entries = synth_sweep(gt, DEFAULT_PSTATES, replicates=3, out_dir=out, config_label="Host 1")
print(f"{len(entries)} runs written under {out}")

# each run becomes one RunAnalysis: phase windows, per-source power, energy
analyses, errors = analyze_index(out / "index.json")
a = analyses[0]
print(f"{a.run_id}: {a.exec_window_s:.2f} s at {a.host_freq} GHz, "
      f"P_cpu {a.p_cpu_avg:.2f} W, E_cpu {a.e_cpu:.1f} J")

# replicates at one frequency are averaged, then both models are fitted
results, fit_errors = fit_groups(analyses, n_cores=16)
model, opt, _ = results[0]
print()
print(format_table([report_row(model, opt)]))
print()
for name in ("t_on", "t_off", "k", "P_s"):
    print(f"{name:>5}: fitted {getattr(model, name):.6f}  truth {getattr(gt, name)}")

# now with 1% multiplicative noise on every sample and on the reported time
noisy = GroundTruth(t_on=64.19, t_off=0.61, k=0.34, P_s=23.09, noise_rel=0.01, seed=7)
out2 = Path(tempfile.mkdtemp(prefix="phienergy-noisy-"))
synth_sweep(noisy, DEFAULT_PSTATES, replicates=5, out_dir=out2, config_label="Host 1 noisy")
(model2, _, _), = fit_groups(analyze_index(out2 / "index.json")[0], n_cores=16)[0]
print()
print(f"noisy fit: t_on {model2.t_on:.2f}, k {model2.k:.4f}, P_s {model2.P_s:.2f}, "
      f"R2(T) {model2.r2_time:.4f}")
