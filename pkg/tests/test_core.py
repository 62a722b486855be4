import math

import numpy as np
import pytest

from fallsift.core import (
    AccelSample,
    AccelWindow,
    Dataset,
    FeedbackSample,
    Label,
    Provenance,
    Source,
    Verdict,
    load_dataset,
    load_feedback,
    save_dataset,
    save_feedback,
    segment_stream,
    smv,
)
from fallsift.errors import ConfigurationError, MergeError, SchemaError

from conftest import make_stream, make_window


class TestSegmentStream:
    def test_266_samples_two_windows(self):
        stream = make_stream(266)
        windows = segment_stream(stream, window_size=128, overlap=10)
        assert len(windows) == 2
        assert windows[0].t0_ms == stream[0].t
        assert windows[1].t0_ms == stream[118].t

    def test_exact_fit_single_window(self):
        windows = segment_stream(make_stream(128), window_size=128, overlap=10)
        assert len(windows) == 1

    def test_insufficient_data_is_empty_not_error(self):
        assert segment_stream(make_stream(127), window_size=128, overlap=10) == []

    def test_overlap_must_be_smaller_than_window(self):
        with pytest.raises(ConfigurationError):
            segment_stream(make_stream(300), window_size=128, overlap=128)

    def test_non_increasing_timestamps_rejected(self):
        stream = make_stream(10)
        stream[5] = AccelSample(t=stream[4].t, x=0.0, y=0.0, z=0.0)
        with pytest.raises(ConfigurationError):
            segment_stream(stream, window_size=4, overlap=1)

    @pytest.mark.parametrize("n,w,overlap", [(266, 128, 10), (500, 64, 0), (333, 50, 25), (128, 128, 0)])
    def test_window_count_formula(self, n, w, overlap):
        windows = segment_stream(make_stream(n), window_size=w, overlap=overlap)
        assert len(windows) == (n - w) // (w - overlap) + 1

    def test_consecutive_windows_share_overlap_samples(self):
        stream = make_stream(300)
        windows = segment_stream(stream, window_size=64, overlap=16)
        for a, b in zip(windows, windows[1:]):
            assert np.array_equal(a.xyz[-16:], b.xyz[:16])

    def test_windows_are_contiguous_slices(self):
        stream = make_stream(300)
        raw = np.array([[s.x, s.y, s.z] for s in stream])
        for k, w in enumerate(segment_stream(stream, window_size=64, overlap=16)):
            start = k * 48
            assert np.array_equal(w.xyz, raw[start : start + 64])


class TestSmv:
    def test_zero_window(self, window_factory):
        assert np.array_equal(smv(window_factory(n=5)), np.zeros(5))

    def test_pythagorean(self, window_factory):
        w = window_factory(xyz=np.tile([3.0, 4.0, 0.0], (6, 1)))
        assert np.array_equal(smv(w), np.full(6, 5.0))

    def test_matches_elementwise_recomputation(self, window_factory):
        w = window_factory(seed=3, n=32)
        expected = [math.sqrt(x * x + y * y + z * z) for x, y, z in w.xyz]
        assert np.allclose(smv(w), expected, rtol=0, atol=0)


class TestDomainTypes:
    def test_window_rejects_non_finite(self):
        with pytest.raises(ConfigurationError):
            make_window(xyz=np.array([[np.nan, 0, 0]]))

    def test_window_array_is_read_only(self, window_factory):
        w = window_factory(n=4)
        with pytest.raises(ValueError):
            w.xyz[0, 0] = 1.0

    def test_feedback_verdict_must_match_label(self, window_factory):
        fall = window_factory(label=Label.FALL)
        adl = window_factory(label=Label.ADL)
        FeedbackSample(window=fall, verdict=Verdict.TP, round=1)
        FeedbackSample(window=adl, verdict=Verdict.FP, round=1)
        with pytest.raises(ConfigurationError):
            FeedbackSample(window=fall, verdict=Verdict.FP, round=1)
        with pytest.raises(ConfigurationError):
            FeedbackSample(window=adl, verdict=Verdict.TP, round=1)

    def test_dataset_rejects_duplicate_identities(self, window_factory):
        w1 = window_factory(t0_ms=0)
        w2 = window_factory(t0_ms=0)
        with pytest.raises(MergeError):
            Dataset(windows=(w1, w2))


class TestPersistence:
    def _dataset(self, n_windows=5, window_len=16):
        windows = [
            make_window(seed=i, n=window_len, t0_ms=i * 1000, subject_id="subj",
                        label=Label.FALL if i % 2 else Label.ADL,
                        activity="walking" if i % 2 == 0 else None)
            for i in range(n_windows)
        ]
        return Dataset(windows=tuple(windows))

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_round_trip_identity(self, tmp_path, fmt):
        ds = self._dataset()
        path = tmp_path / f"data.{fmt}"
        save_dataset(ds, path, format=fmt)
        assert load_dataset(path, format=fmt) == ds

    def test_round_trip_is_bit_exact(self, tmp_path):
        ds = self._dataset()
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        for a, b in zip(ds.windows, loaded.windows):
            assert np.array_equal(a.xyz, b.xyz)

    def test_empty_file_loads_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        ds = load_dataset(path)
        assert len(ds) == 0

    def test_wrong_column_count_is_schema_error(self, tmp_path):
        ds = self._dataset(n_windows=1, window_len=4)
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        lines[1] = ",".join(lines[1].split(",")[:-1])  # drop one value column
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match=":2"):
            load_dataset(path)

    def test_malformed_value_names_line_number(self, tmp_path):
        ds = self._dataset(n_windows=3, window_len=4)
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        parts = lines[2].split(",")
        parts[-1] = "not-a-number"
        lines[2] = ",".join(parts)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match=":3"):
            load_dataset(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(SchemaError, match=":1"):
            load_dataset(path)

    @pytest.mark.parametrize("fmt", ["csv", "jsonl"])
    def test_feedback_round_trip(self, tmp_path, fmt):
        samples = [
            FeedbackSample(
                window=make_window(seed=i, n=8, t0_ms=i * 500, label=Label.FALL if i == 0 else Label.ADL,
                                   activity="waving", source=Source.FEEDBACK),
                verdict=Verdict.TP if i == 0 else Verdict.FP,
                round=1 + i % 3,
            )
            for i in range(4)
        ]
        path = tmp_path / f"fb.{fmt}"
        save_feedback(samples, path, format=fmt)
        loaded = load_feedback(path, format=fmt)
        assert loaded == samples

    def test_feedback_bad_verdict_is_schema_error(self, tmp_path):
        samples = [
            FeedbackSample(window=make_window(n=4, source=Source.FEEDBACK), verdict=Verdict.FP, round=1)
        ]
        path = tmp_path / "fb.csv"
        save_feedback(samples, path)
        text = path.read_text().replace(",fp,", ",xx,")
        path.write_text(text)
        with pytest.raises(SchemaError, match=":2"):
            load_feedback(path)
