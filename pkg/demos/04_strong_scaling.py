"""
Strong-scaling report
=====================

Energy and average power across problem sizes at f_max, written as
plot-ready rows. One size exits early and is flagged.
"""
import tempfile
from pathlib import Path

from phienergy import GroundTruth, synth_strong_scaling
from phienergy.report import STRONG_SCALING, analyze_index, plot_rows, write_plot_csv

# execution time grows with problem size; power parameters stay put
gts = {size: GroundTruth(t_on=0.02 * size ** 2, t_off=2.0, k=0.36, P_s=24.67)
       for size in (30, 40, 50, 60, 70)}
out = Path(tempfile.mkdtemp(prefix="phienergy-scaling-"))
synth_strong_scaling(gts, out, config_label="Host 1", truncate_sizes={70})

analyses, _ = analyze_index(out / "index.json")
rows = plot_rows(analyses, STRONG_SCALING)
for r in rows:
    print(f"size {r['problem_size']:>3}: E {r['e_total']:9.1f} J  P {r['p_avg']:6.2f} W  "
          f"{r['flags']}")

print("\nwritten to", write_plot_csv(rows, out / "strong_scaling.csv"))
