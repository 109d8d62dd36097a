import io
import json
import tempfile
from dataclasses import replace
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings

from phienergy.analyze import mic_total
from phienergy.ingest import (
    ManifestError,
    TraceFormatError,
    format_cpu_counter_trace,
    format_mic_trace,
    format_system_trace,
    load_bundle,
    parse_cpu_counter_trace,
    parse_mic_trace,
    parse_system_trace,
    write_bundle,
)
from phienergy.synth import build_bundle

from conftest import ground_truth
from strategies import bundles, counter_traces, mic_traces, system_traces


def assert_bundles_equal(a, b):
    assert a.manifest == replace(b.manifest, trace_paths=a.manifest.trace_paths)
    assert a.system == b.system
    assert a.cpu_counter == b.cpu_counter
    assert a.mic == b.mic


class TestSystemTrace:
    def test_two_lines(self):
        tr = parse_system_trace("1000,150.0\n2000,151.5")
        assert tr.t_ms.tolist() == [1000, 2000]
        assert tr.watts.tolist() == [150.0, 151.5]
        assert np.diff(tr.t_ms).tolist() == [1000]

    def test_malformed_row_skipped(self):
        tr = parse_system_trace("# source=system_meter\n1000,150.0\n2000,abc\n3000,152.0\n")
        assert tr.t_ms.tolist() == [1000, 3000]
        assert len(tr.warnings) == 1 and "2000,abc" in tr.warnings[0]

    def test_unsorted(self):
        with pytest.raises(TraceFormatError, match="unsorted trace"):
            parse_system_trace("2000,150.0\n1000,151.0")

    def test_duplicate_timestamp_is_unsorted(self):
        with pytest.raises(TraceFormatError, match="unsorted trace"):
            parse_system_trace("1000,150.0\n1000,151.0")

    @pytest.mark.parametrize("text", ["", "# source=system_meter\n", "x,y\n"])
    def test_empty(self, text):
        with pytest.raises(TraceFormatError, match="empty trace"):
            parse_system_trace(text)

    def test_wrong_source(self):
        with pytest.raises(TraceFormatError, match="source"):
            parse_system_trace("# source=cpu_counter\n0,1.0\n")

    def test_reads_file_objects(self):
        tr = parse_system_trace(io.StringIO("# schema_version=1\n0,1.0\n1000,2.0\n"))
        assert len(tr) == 2


class TestCounterTrace:
    def test_two_lines(self):
        tr = parse_cpu_counter_trace("0,1000000\n50,1003000")
        assert tr.cumulative_uj.tolist() == [1000000, 1003000]

    def test_value_at_wrap_rejected(self):
        with pytest.raises(TraceFormatError, match="counter exceeds declared wrap"):
            parse_cpu_counter_trace("# wrap_uj=4294967295\n0,4294967295\n")

    def test_wrap_pattern_preserved(self):
        tr = parse_cpu_counter_trace("# wrap_uj=4294967295\n0,4294960000\n50,5000\n")
        assert tr.cumulative_uj.tolist() == [4294960000, 5000]
        assert tr.wrap_uj == 4294967295

    def test_malformed_row_is_fatal(self):
        with pytest.raises(TraceFormatError):
            parse_cpu_counter_trace("0,1\n50,abc\n")


class TestMicTrace:
    def test_single_row_total(self):
        tr = parse_mic_trace("0,60.0,70.0,75.0")
        assert mic_total(tr).tolist() == [205.0]

    def test_all_zero_row(self):
        tr = parse_mic_trace("# device_index=1\n0,0,0,0\n")
        assert tr.device_index == 1 and mic_total(tr).tolist() == [0.0]

    def test_missing_column(self):
        with pytest.raises(TraceFormatError, match="expected 4 fields"):
            parse_mic_trace("0,60.0,70.0")

    def test_negative_power(self):
        with pytest.raises(TraceFormatError, match="negative connector power"):
            parse_mic_trace("0,60.0,-1.0,75.0")

    def test_sum_equals_decimal_sum(self):
        rows = ["0,60.1,70.2,75.3", "50,0.1,0.2,0.3", "100,199.99,0.005,1e-3"]
        tr = parse_mic_trace("\n".join(rows))
        for row, total in zip(rows, mic_total(tr)):
            fields = [float(Decimal(x)) for x in row.split(",")[1:]]
            assert total == fields[0] + fields[1] + fields[2]


@settings(max_examples=50, deadline=None)
@given(system_traces())
def test_system_roundtrip(tr):
    assert parse_system_trace(format_system_trace(tr)) == tr


@settings(max_examples=50, deadline=None)
@given(counter_traces())
def test_counter_roundtrip(tr):
    assert parse_cpu_counter_trace(format_cpu_counter_trace(tr)) == tr


@settings(max_examples=50, deadline=None)
@given(mic_traces(device_index=3))
def test_mic_roundtrip(tr):
    assert parse_mic_trace(format_mic_trace(tr)) == tr


@settings(max_examples=30, deadline=None)
@given(bundles())
def test_bundle_roundtrip(bundle):
    with tempfile.TemporaryDirectory() as d:
        assert_bundles_equal(load_bundle(write_bundle(bundle, d)), bundle)


def test_bundle_with_two_devices(tmp_path):
    b = build_bundle(ground_truth("CoMD MIC 2"), 2.01)
    loaded = load_bundle(write_bundle(b, tmp_path))
    assert len(loaded.mic) == 2
    assert [t.device_index for t in loaded.mic] == [0, 1]
    assert_bundles_equal(loaded, b)


def test_missing_trace_file_named(tmp_path):
    b = build_bundle(ground_truth("CoMD MIC 1"), 2.01)
    path = write_bundle(b, tmp_path)
    (tmp_path / f"{b.manifest.run_id}.mic0.csv").unlink()
    with pytest.raises(FileNotFoundError, match=r"\.mic0\.csv"):
        load_bundle(path)


def test_manifest_violations_promoted(tmp_path):
    b = build_bundle(ground_truth("CoMD Host 1"), 2.01)
    path = write_bundle(b, tmp_path)
    doc = json.loads(path.read_text())
    doc["t2_app_start"] = doc["t3_app_end"] + 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="timestamps not increasing"):
        load_bundle(path)


def test_device_count_mismatch(tmp_path):
    b = build_bundle(ground_truth("CoMD MIC 1"), 2.01)
    path = write_bundle(b, tmp_path)
    doc = json.loads(path.read_text())
    doc["trace_paths"]["mic"] = []
    path.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="n_xeon_phi"):
        load_bundle(path)
