import filecmp
import json

import numpy as np
import pytest

from phienergy.analyze import analyze_run
from phienergy.ingest import load_bundle, read_index
from phienergy.report import analyze_index, fit_groups, plot_rows
from phienergy.synth import GroundTruth, build_bundle, synth_run, synth_strong_scaling, synth_sweep
from phienergy.types import DEFAULT_PSTATES, Phase

from conftest import ground_truth


def test_protocol_timeline(comd_host1):
    m = build_bundle(comd_host1, 2.01).manifest
    assert m.t1_component_readers_start - m.t0_system_meter_start == 15000
    assert m.t2_app_start - m.t1_component_readers_start == 15000
    assert m.t4_readers_stop - m.t3_app_end == 20000
    assert m.t5_cooldown_end - m.t4_readers_stop == 60000
    assert m.t3_app_end - m.t2_app_start == 64800
    assert m.exec_time_reported == pytest.approx(64.80, abs=1e-12)


def test_energy_self_consistent(comd_host1, tmp_path):
    m = synth_run(comd_host1, 2.01, tmp_path)
    a = analyze_run(load_bundle(tmp_path / m.run_id / "run.json"))
    assert a.e_cpu == pytest.approx(64.80 * 67.27, rel=1e-2)


def test_no_devices_no_mic_files(comd_host1, tmp_path):
    m = synth_run(comd_host1, 1.5, tmp_path)
    assert m.trace_paths["mic"] == []
    assert not list((tmp_path / m.run_id).glob("*.mic*.csv"))
    assert analyze_run(load_bundle(tmp_path / m.run_id / "run.json")).e_mic == 0.0


def test_connector_split(lulesh_mic1):
    b = build_bundle(lulesh_mic1, 1.5)
    t = b.mic[0]
    exec_mask = (t.t_ms >= b.manifest.t2_app_start) & (t.t_ms <= b.manifest.t3_app_end)
    assert t.pcie_w[exec_mask] == pytest.approx(60.0)
    assert t.c2x3_w[exec_mask] == pytest.approx(70.0)
    assert t.c2x4_w[~exec_mask] == pytest.approx(0.3 * 70.0)


def test_wrap_near_boundary_matches_baseline():
    base = ground_truth("CoMD Host 1")
    near = ground_truth("CoMD Host 1", counter_offset_uj=base.wrap_uj - 1_000_000_000)
    b1, b2 = build_bundle(base, 2.01), build_bundle(near, 2.01)
    c = b2.cpu_counter.cumulative_uj
    assert np.any(np.diff(c) < 0), "offset run should wrap"
    assert analyze_run(b1).e_cpu == analyze_run(b2).e_cpu


def test_deterministic(tmp_path):
    gt = ground_truth("LULESH MIC 2", noise_rel=0.02, seed=11)
    m1 = synth_run(gt, 1.7, tmp_path / "a")
    m2 = synth_run(gt, 1.7, tmp_path / "b")
    d1, d2 = tmp_path / "a" / m1.run_id, tmp_path / "b" / m2.run_id
    names = sorted(p.name for p in d1.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(d1, d2, names, shallow=False)
    assert match == names and not mismatch and not errors


def test_seed_changes_output():
    a = build_bundle(ground_truth("CoMD Host 1", noise_rel=0.01, seed=1), 1.5)
    b = build_bundle(ground_truth("CoMD Host 1", noise_rel=0.01, seed=2), 1.5)
    assert a.system != b.system


def test_invalid_frequency(comd_host1):
    with pytest.raises(ValueError, match="P-state"):
        build_bundle(comd_host1, 1.25)


def test_synthetic_block_echoes_parameters(lulesh_mic1, tmp_path):
    m = synth_run(lulesh_mic1, 1.2, tmp_path)
    doc = json.loads((tmp_path / m.run_id / "run.json").read_text())
    assert doc["synthetic"]["t_on"] == 118.35
    assert doc["synthetic"]["f"] == 1.2


def test_sweep_count(tmp_path):
    entries = synth_sweep(ground_truth("CoMD Host 2"), DEFAULT_PSTATES, 3, tmp_path)
    assert len(entries) == 30
    assert len(read_index(tmp_path / "index.json")) == 30
    assert {e["config_label"] for e in entries} == {"Host 1"}


def test_sweep_roundtrip_noiseless(tmp_path):
    gt = ground_truth("LULESH MIC 2")
    synth_sweep(gt, DEFAULT_PSTATES, 1, tmp_path, config_label="LULESH MIC 2")
    analyses, errors = analyze_index(tmp_path / "index.json")
    assert not errors
    [(m, _, _)] = fit_groups(analyses, 16)[0]
    for name in ("t_on", "t_off", "k", "P_s"):
        assert getattr(m, name) == pytest.approx(getattr(gt, name), rel=1e-6)
    assert m.p_mic_avg == pytest.approx(400.0, rel=1e-9)


def test_sweep_noisy_t_on(tmp_path):
    gt = ground_truth("CoMD Host 1", noise_rel=0.02, seed=3)
    synth_sweep(gt, DEFAULT_PSTATES, 5, tmp_path)
    [(m, _, _)] = fit_groups(analyze_index(tmp_path / "index.json")[0], 16)[0]
    assert m.t_on == pytest.approx(gt.t_on, rel=0.05)


def test_strong_scaling(tmp_path):
    gts = {s: GroundTruth(t_on=s, t_off=5.0, k=0.3, P_s=22.0, n_devices=1)
           for s in (30, 40, 50, 60, 70)}
    entries = synth_strong_scaling(gts, tmp_path, config_label="MIC 1")
    assert len(entries) == 5
    assert all(e["host_freq"] == 2.01 for e in entries)
    rows = plot_rows(analyze_index(tmp_path / "index.json")[0], "strong_scaling")
    energies = [r["e_total"] for r in rows]
    assert [r["problem_size"] for r in rows] == [30, 40, 50, 60, 70]
    assert energies == sorted(energies)


def test_strong_scaling_early_exit(tmp_path):
    gts = {s: ground_truth("CoMD MIC 2") for s in (30, 40, 50)}
    synth_strong_scaling(gts, tmp_path, truncate_sizes={40})
    analyses = {a.problem_size: a for a in analyze_index(tmp_path / "index.json")[0]}
    assert any("short execution window" in f for f in analyses[40].flags)
    assert not analyses[30].flags and not analyses[50].flags
    assert analyses[40].e_total < analyses[30].e_total


def test_phase_durations_match_protocol(lulesh_mic1):
    b = build_bundle(lulesh_mic1, 1.4)
    a = analyze_run(b)
    m = b.manifest
    assert a.phase(Phase.BASELINE_IDLE).duration_s == 15.0
    assert a.phase(Phase.INSTRUMENTED_IDLE).duration_s == 15.0
    assert a.phase(Phase.POST_IDLE).duration_s == 20.0
    assert a.phase(Phase.EXECUTION).duration_s == (m.t3_app_end - m.t2_app_start) / 1000
