import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsnn.datasets import (
    BadMagicError,
    CountMismatchError,
    DataFormatError,
    Dataset,
    EventStream,
    TruncatedFileError,
    bin_events,
    event_stream_from_text,
    event_stream_to_text,
    load_event_dataset,
    load_idx,
    make_xor,
    read_idx_images,
    read_idx_labels,
    save_event_dataset,
    synth_digits,
    synth_events,
    write_idx_images,
    write_idx_labels,
)


class TestDataset:
    def test_label_range_checked(self):
        with pytest.raises(ValueError):
            Dataset(kind="static-images", inputs=np.zeros((2, 1)),
                    labels=[0, 5], train_idx=[0, 1], test_idx=[],
                    num_classes=3)

    def test_index_bounds_checked(self):
        with pytest.raises(ValueError):
            Dataset(kind="static-images", inputs=np.zeros((2, 1)),
                    labels=[0, 1], train_idx=[0, 7], test_idx=[],
                    num_classes=2)

    def test_split_overlap_rejected(self):
        with pytest.raises(ValueError):
            Dataset(kind="static-images", inputs=np.zeros((2, 1)),
                    labels=[0, 1], train_idx=[0, 1], test_idx=[1],
                    num_classes=2)

    def test_unknown_split(self):
        with pytest.raises(ValueError):
            make_xor().split("validation")

    def test_static_arrays(self):
        ds = make_xor()
        x, y = ds.static_arrays("train")
        assert x.shape == (4, 2)
        assert y.tolist() == [0, 1, 1, 0]

    def test_kind_guard(self):
        with pytest.raises(ValueError):
            make_xor().event_tensors("train", 4)


class TestIdx:
    def test_image_round_trip(self, tmp_path):
        images = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
        path = tmp_path / "img.idx"
        write_idx_images(path, images)
        back = read_idx_images(path)
        assert back.tobytes() == images.tobytes()
        assert back.shape == (2, 3, 4)

    def test_label_round_trip(self, tmp_path):
        path = tmp_path / "lbl.idx"
        write_idx_labels(path, np.array([3, 1, 4]))
        assert read_idx_labels(path).tolist() == [3, 1, 4]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"\x00\x00\x08\x01" + b"\x00" * 12)
        with pytest.raises(BadMagicError):
            read_idx_images(path)

    def test_truncated_payload(self, tmp_path):
        images = np.zeros((2, 3, 3), dtype=np.uint8)
        path = tmp_path / "img.idx"
        write_idx_images(path, images)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(TruncatedFileError):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "img.idx"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(TruncatedFileError):
            read_idx_images(path)

    def test_count_mismatch(self, tmp_path):
        write_idx_images(tmp_path / "i.idx", np.zeros((2, 2, 2), dtype=np.uint8))
        write_idx_labels(tmp_path / "l.idx", np.array([1, 0, 1]))
        with pytest.raises(CountMismatchError):
            load_idx(tmp_path / "i.idx", tmp_path / "l.idx", num_classes=2)

    def test_load_scales_and_splits(self, tmp_path):
        write_idx_images(tmp_path / "tri.idx",
                         np.full((3, 2, 2), 255, dtype=np.uint8))
        write_idx_labels(tmp_path / "trl.idx", np.array([0, 1, 0]))
        write_idx_images(tmp_path / "tei.idx",
                         np.zeros((2, 2, 2), dtype=np.uint8))
        write_idx_labels(tmp_path / "tel.idx", np.array([1, 1]))
        ds = load_idx(tmp_path / "tri.idx", tmp_path / "trl.idx",
                      tmp_path / "tei.idx", tmp_path / "tel.idx", num_classes=2)
        assert len(ds) == 5
        assert ds.train_idx.tolist() == [0, 1, 2]
        assert ds.test_idx.tolist() == [3, 4]
        assert float(ds.inputs.max()) == 1.0
        assert ds.inputs.dtype == np.float64


class TestSynthDigits:
    def test_shapes_and_determinism(self):
        a_img, a_lbl = synth_digits(20, seed=4)
        b_img, b_lbl = synth_digits(20, seed=4)
        assert a_img.shape == (20, 28, 28)
        assert a_img.dtype == np.uint8
        assert a_img.tobytes() == b_img.tobytes()
        assert a_lbl.tolist() == b_lbl.tolist()

    def test_seed_changes_content(self):
        a_img, _ = synth_digits(20, seed=1)
        b_img, _ = synth_digits(20, seed=2)
        assert a_img.tobytes() != b_img.tobytes()

    def test_covers_all_classes(self):
        _, labels = synth_digits(300, seed=0)
        assert sorted(set(labels.tolist())) == list(range(10))

    def test_glyph_too_big(self):
        with pytest.raises(ValueError):
            synth_digits(1, size=16)


class TestEventStream:
    def test_sorts_by_time(self):
        s = EventStream(events=np.array([[3, 0, 0, 1], [1, 1, 1, 0]]),
                        duration=4, width=2, height=2)
        assert s.events[:, 0].tolist() == [1, 3]

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            EventStream(events=np.array([[5, 0, 0, 1]]), duration=4,
                        width=2, height=2)
        with pytest.raises(ValueError):
            EventStream(events=np.array([[0, 2, 0, 1]]), duration=4,
                        width=2, height=2)
        with pytest.raises(ValueError):
            EventStream(events=np.array([[0, 0, 0, 2]]), duration=4,
                        width=2, height=2)

    def test_binning_places_events(self):
        s = EventStream(events=np.array([[0, 1, 0, 1], [3, 0, 1, 0]]),
                        duration=4, width=2, height=2)
        frames = bin_events(s, 2)
        assert frames.shape == (2, 2, 2, 2)
        assert frames[0, 1, 0, 1] == 1.0   # ON event, first window
        assert frames[1, 0, 1, 0] == 1.0   # OFF event, second window
        assert frames.sum() == 2.0

    def test_binning_rejects_oversampling(self):
        s = EventStream(events=np.zeros((0, 4)), duration=4, width=2, height=2)
        with pytest.raises(ValueError):
            bin_events(s, 5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 16), st.integers(0, 40), st.integers(0, 2**31))
    def test_binning_conserves_count(self, t_steps, n_events, seed):
        duration = 16
        rng = np.random.default_rng(seed)
        events = np.column_stack([
            rng.integers(0, duration, n_events),
            rng.integers(0, 5, n_events),
            rng.integers(0, 4, n_events),
            rng.integers(0, 2, n_events),
        ]) if n_events else np.zeros((0, 4), dtype=np.int64)
        s = EventStream(events=events, duration=duration, width=5, height=4)
        assert bin_events(s, t_steps).sum() == float(n_events)

    def test_text_round_trip(self):
        s = EventStream(events=np.array([[0, 1, 2, 1], [5, 0, 0, 0]]),
                        duration=8, width=3, height=3)
        back = event_stream_from_text(event_stream_to_text(s))
        assert back.events.tolist() == s.events.tolist()
        assert (back.duration, back.width, back.height) == (8, 3, 3)

    def test_text_header_required(self):
        with pytest.raises(DataFormatError):
            event_stream_from_text("0 0 0 1\n")

    def test_text_header_fields_required(self):
        with pytest.raises(DataFormatError):
            event_stream_from_text("# duration=4 width=2\n")

    def test_text_field_count(self):
        with pytest.raises(DataFormatError):
            event_stream_from_text("# duration=4 width=2 height=2\n0 0 1\n")


class TestSynthEvents:
    def test_moving_bar_counts_uniform(self):
        # equal event mass per frame makes time-collapsed views useless
        ds = synth_events("moving-bar", 6, frame=(8, 8), duration=16, seed=3)
        for i in range(6):
            frames = bin_events(ds.inputs[i], 16)
            per_step = frames.sum(axis=(1, 2, 3))
            assert np.all(per_step == per_step[0])

    def test_rotation_two_events_per_step(self):
        ds = synth_events("two-class-rotation", 4, frame=(12, 12), duration=8)
        for s in ds.inputs:
            assert len(s.events) == 2 * 8

    def test_split_sizes(self):
        ds = synth_events("moving-bar", 40, seed=0, test_fraction=0.25)
        assert len(ds.train_idx) == 30
        assert len(ds.test_idx) == 10

    def test_deterministic(self):
        a = synth_events("moving-bar", 5, seed=9)
        b = synth_events("moving-bar", 5, seed=9)
        for sa, sb in zip(a.inputs, b.inputs):
            assert sa.events.tolist() == sb.events.tolist()
        assert a.labels.tolist() == b.labels.tolist()

    def test_unknown_pattern(self):
        with pytest.raises(ValueError):
            synth_events("drifting-grating", 4)

    def test_event_tensors_shape(self):
        ds = synth_events("moving-bar", 8, frame=(6, 6), duration=16, seed=1)
        frames, labels = ds.event_tensors("train", 4)
        assert frames.shape == (len(ds.train_idx), 4, 2, 6, 6)
        assert len(labels) == len(ds.train_idx)


class TestEventDatasetFiles:
    def test_save_load_round_trip(self, tmp_path):
        ds = synth_events("moving-bar", 5, frame=(6, 6), duration=8, seed=2)
        save_event_dataset(ds, tmp_path / "events", config={"seed": 2})
        back = load_event_dataset(tmp_path / "events")
        assert back.labels.tolist() == ds.labels.tolist()
        assert back.train_idx.tolist() == ds.train_idx.tolist()
        for sa, sb in zip(ds.inputs, back.inputs):
            assert sa.events.tolist() == sb.events.tolist()

    def test_manifest_records_config(self, tmp_path):
        import json
        ds = synth_events("moving-bar", 3, frame=(6, 6), duration=8)
        save_event_dataset(ds, tmp_path / "ev", config={"pattern": "moving-bar"})
        manifest = json.loads((tmp_path / "ev" / "manifest.json").read_text())
        assert manifest["config"] == {"pattern": "moving-bar"}
        assert manifest["duration"] == 8

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_event_dataset(tmp_path)

    def test_kind_guard(self, tmp_path):
        with pytest.raises(ValueError):
            save_event_dataset(make_xor(), tmp_path / "x")


class TestXor:
    def test_four_patterns(self):
        ds = make_xor()
        assert len(ds) == 4
        assert ds.labels.tolist() == [0, 1, 1, 0]
        assert ds.test_idx.size == 0
