"""
Phase segmentation and counter unwrapping
=========================================

A run has a wall-meter baseline, an instrumented idle, the execution and a
post-run idle. Energy counters wrap, so they are unwrapped before summing.
"""
import tempfile

import numpy as np

from phienergy import GroundTruth, analyze_run, load_bundle, segment_phases, write_bundle
from phienergy.analyze import unwrap_counter
from phienergy.synth import build_bundle

gt = GroundTruth(t_on=13.21, t_off=55.41, k=0.29, P_s=22.94, n_devices=1,
                 reader_overhead_w=4.0)
bundle = build_bundle(gt, 1.6)

for phase, w in segment_phases(bundle).items():
    print(f"{phase.value:>18}: {w.duration_s:8.3f} s")

a = analyze_run(bundle)
print(f"\nE_cpu {a.e_cpu:.1f} J + E_mic {a.e_mic:.1f} J = {a.e_total:.1f} J")
print(f"device power {a.p_mic_avg_per_device[0]:.1f} W, "
      f"reader overhead {a.overhead_w:.2f} W")

# a tiny wrap range shows what unwrapping does
counts = np.array([90, 95, 3, 8, 1])
deltas, anomalous = unwrap_counter(counts, wrap_uj=100)
print(f"\ncounts {counts.tolist()} -> deltas {deltas.tolist()}, anomalous {anomalous.tolist()}")

# moving the counter start right below its wrap point changes nothing
offset = gt.wrap_uj - 10**9
wrapped = build_bundle(GroundTruth(**{**vars(gt), "counter_offset_uj": offset}), 1.6)
print(f"e_cpu with wrap {analyze_run(wrapped).e_cpu:.6f} J vs {a.e_cpu:.6f} J")

# the files round-trip unchanged
path = write_bundle(bundle, tempfile.mkdtemp(prefix="phienergy-run-"))
again = load_bundle(path)
print(f"\nwrote {path}; reload equal: {again.system == bundle.system and again.mic == bundle.mic}")
