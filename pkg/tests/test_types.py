import math
from dataclasses import replace

import pytest

from phienergy.types import (
    DEFAULT_PSTATES,
    ExecMode,
    FittedModel,
    PStateTable,
    RunConfig,
    RunManifest,
    validate_manifest,
)


def make_manifest(**kw):
    config = RunConfig(problem_size=60, n_nodes=1, n_mpi_tasks=1, n_xeon_phi=0,
                       mic_affinity="compact", mic_exec_mode="host_only", host_freq=2.01,
                       n_host_omp=16, n_mic_omp=0, app_name="CoMD", config_label="Host 1")
    base = dict(run_id="r0", config=config, t0_system_meter_start=0,
                t1_component_readers_start=15000, t2_app_start=30000, t3_app_end=90000,
                t4_readers_stop=110000, t5_cooldown_end=170000, exec_time_reported=60.0)
    base.update(kw)
    return RunManifest(**base)


def test_default_table_matches_platform():
    assert DEFAULT_PSTATES.levels == (2.01, 2.0, 1.9, 1.8, 1.7, 1.6, 1.5, 1.4, 1.3, 1.2)
    assert len(DEFAULT_PSTATES) == 10
    assert DEFAULT_PSTATES.f_max == 2.01
    steps = [round(a - b, 6) for a, b in zip(DEFAULT_PSTATES.levels, DEFAULT_PSTATES.levels[1:])]
    assert steps[0] == 0.01
    assert all(s == 0.1 for s in steps[1:])


@pytest.mark.parametrize("levels", [(2.0,), (1.2, 2.0), (2.0, 2.0, 1.0), (2.0, 0.0)])
def test_table_rejects_bad_levels(levels):
    with pytest.raises(ValueError):
        PStateTable(levels)


def test_table_neighbors_and_membership():
    assert 1.3 in DEFAULT_PSTATES
    assert 1.25 not in DEFAULT_PSTATES
    assert DEFAULT_PSTATES.neighbors(1.2853) == (1.2, 1.3)
    assert DEFAULT_PSTATES.neighbors(1.3) == (1.3, 1.3)
    assert DEFAULT_PSTATES.neighbors(1.0) == (None, 1.2)
    assert PStateTable.from_iterable([1.2, 2.0, 1.5]).levels == (2.0, 1.5, 1.2)


def test_well_formed_manifest_has_no_violations():
    assert validate_manifest(make_manifest()) == []


def test_unordered_timestamps():
    v = validate_manifest(make_manifest(t2_app_start=95000))
    assert [str(x) for x in v] == ["timestamps not increasing: t2≥t3"]
    assert v[0].severity == "error"


def test_reported_time_deviation_is_warning():
    # window 40 s, reported 30 s: |30 - 40| / 40 = 25% > 10%
    m = make_manifest(t3_app_end=70000, t4_readers_stop=90000, t5_cooldown_end=150000,
                      exec_time_reported=30.0)
    v = validate_manifest(m)
    assert [str(x) for x in v] == ["reported time deviates >10%"]
    assert v[0].severity == "warning"


def test_config_rules():
    m = make_manifest()
    bad = replace(m.config, host_freq=1.25, n_xeon_phi=1, n_mpi_tasks=-1)
    rules = {x.field for x in validate_manifest(replace(m, config=bad))}
    assert rules == {"config.host_freq", "config.n_xeon_phi", "config.n_mpi_tasks"}
    assert m.config.mic_exec_mode is ExecMode.HOST_ONLY


def test_fitted_model_invariants():
    m = FittedModel(t_on=0.0, t_off=5.0, k=0.3, P_s=20.0, n_cores=16, f_max=2.01)
    assert math.isinf(m.boundedness)
    with pytest.raises(ValueError):
        FittedModel(t_on=-1.0, t_off=5.0, k=0.3, P_s=20.0, n_cores=16, f_max=2.01)
    with pytest.raises(ValueError):
        FittedModel(t_on=1.0, t_off=5.0, k=0.3, P_s=20.0, n_cores=0, f_max=2.01)
