"""Dataset ingestion and generation: IDX image archives, synthetic glyph
digits, and synthetic event streams with a plain-text on-disk format.

Everything is generated locally and deterministically; no downloads. Event
streams carry (t, x, y, polarity) tuples and bin into per-step frame
tensors with two polarity channels.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "EventStream",
    "DataFormatError",
    "BadMagicError",
    "TruncatedFileError",
    "CountMismatchError",
    "load_idx",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "synth_digits",
    "synth_events",
    "bin_events",
    "event_stream_to_text",
    "event_stream_from_text",
    "save_event_dataset",
    "load_event_dataset",
    "make_xor",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Base class for dataset file format problems."""


class BadMagicError(DataFormatError):
    """File does not start with the expected IDX magic number."""


class TruncatedFileError(DataFormatError):
    """File ends before its declared payload."""


class CountMismatchError(DataFormatError):
    """Image and label files disagree on the sample count."""


@dataclass
class Dataset:
    """Labeled samples with train/test index lists.

    kind 'static-images': inputs is a float64 array [n, ...] in [0, 1].
    kind 'event-streams': inputs is a list of EventStream.
    """

    kind: str
    inputs: object
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        n = len(self.labels)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"got range [{self.labels.min()}, {self.labels.max()}]"
            )
        for name, idx in (("train", self.train_idx), ("test", self.test_idx)):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} indices out of range for {n} samples")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test index lists overlap")

    def __len__(self):
        return len(self.labels)

    def split(self, name: str) -> np.ndarray:
        if name == "train":
            return self.train_idx
        if name == "test":
            return self.test_idx
        raise ValueError(f"unknown split {name!r}")

    def static_arrays(self, split: str):
        """(inputs, labels) for a split of a static-image dataset."""
        if self.kind != "static-images":
            raise ValueError(f"static_arrays on a {self.kind} dataset")
        idx = self.split(split)
        return self.inputs[idx], self.labels[idx]

    def event_tensors(self, split: str, t_steps: int):
        """(binned inputs [n, T, 2, h, w], labels) for an event dataset."""
        if self.kind != "event-streams":
            raise ValueError(f"event_tensors on a {self.kind} dataset")
        idx = self.split(split)
        frames = np.stack([bin_events(self.inputs[i], t_steps) for i in idx])
        return frames, self.labels[idx]


# --- IDX container ---------------------------------------------------------

def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError(f"images must be [n, rows, cols], got shape {images.shape}")
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFileError(
            f"{path}: expected {count} bytes for {what}, found {len(data)}"
        )
    return data


def read_idx_images(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = _read_exact(fh, 4, path, "magic number")
        (magic,) = struct.unpack(">I", header)
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagicError(
                f"{path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
            )
        n, rows, cols = struct.unpack(">III", _read_exact(fh, 12, path, "dimensions"))
        raw = _read_exact(fh, n * rows * cols, path, f"{n} images of {rows}x{cols}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = _read_exact(fh, 4, path, "magic number")
        (magic,) = struct.unpack(">I", header)
        if magic != IDX_LABELS_MAGIC:
            raise BadMagicError(
                f"{path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
            )
        (n,) = struct.unpack(">I", _read_exact(fh, 4, path, "count"))
        raw = _read_exact(fh, n, path, f"{n} labels")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx(images_path, labels_path, test_images_path=None,
             test_labels_path=None, num_classes: int = 10) -> Dataset:
    """Load IDX image/label pairs into a dataset, pixels scaled to [0, 1].

    The first pair becomes the train split; an optional second pair becomes
    the test split.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatchError(
            f"{images_path} holds {len(images)} images but {labels_path} "
            f"holds {len(labels)} labels"
        )
    all_images = [images]
    all_labels = [labels]
    n_train = len(images)
    n_test = 0
    if test_images_path is not None:
        ti = read_idx_images(test_images_path)
        tl = read_idx_labels(test_labels_path)
        if len(ti) != len(tl):
            raise CountMismatchError(
                f"{test_images_path} holds {len(ti)} images but "
                f"{test_labels_path} holds {len(tl)} labels"
            )
        all_images.append(ti)
        all_labels.append(tl)
        n_test = len(ti)
    inputs = np.concatenate(all_images).astype(np.float64) / 255.0
    labels = np.concatenate(all_labels)
    return Dataset(
        kind="static-images", inputs=inputs, labels=labels,
        train_idx=np.arange(n_train),
        test_idx=np.arange(n_train, n_train + n_test),
        num_classes=num_classes,
    )


# --- synthetic digit glyphs ------------------------------------------------

_GLYPHS = [
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
]


def _glyph_bitmap(digit: int, scale: int = 3) -> np.ndarray:
    rows = _GLYPHS[digit]
    small = np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)
    return np.kron(small, np.ones((scale, scale), dtype=np.uint8))


def synth_digits(n: int, seed: int = 0, size: int = 28, max_shift: int = 3,
                 noise: float = 0.04):
    """Labeled glyph-digit images: a 5x7 font upscaled, randomly shifted,
    with salt-and-pepper noise. Returns (uint8 images [n, size, size], labels)."""
    rng = np.random.default_rng(seed)
    glyphs = [_glyph_bitmap(d) for d in range(10)]
    gh, gw = glyphs[0].shape
    if gh + 2 * max_shift > size or gw + 2 * max_shift > size:
        raise ValueError(f"glyphs of {gh}x{gw} with shift {max_shift} exceed {size}x{size}")
    images = np.zeros((n, size, size), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n)
    base_r = (size - gh) // 2
    base_c = (size - gw) // 2
    for i in range(n):
        d = int(labels[i])
        dr, dc = rng.integers(-max_shift, max_shift + 1, size=2)
        r0, c0 = base_r + dr, base_c + dc
        images[i, r0:r0 + gh, c0:c0 + gw] = glyphs[d] * 255
        flip = rng.random((size, size)) < noise
        images[i] = np.where(flip, 255 - images[i], images[i])
    return images, labels.astype(np.int64)


# --- event streams ---------------------------------------------------------

@dataclass
class EventStream:
    """A time-sorted list of (t, x, y, polarity) events on a fixed frame."""

    events: np.ndarray  # int64 [n_events, 4] columns t, x, y, p
    duration: int
    width: int
    height: int

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=np.int64).reshape(-1, 4)
        if self.events.size:
            order = np.argsort(self.events[:, 0], kind="stable")
            self.events = self.events[order]
            t, x, y, p = self.events.T
            if t.min() < 0 or t.max() >= self.duration:
                raise ValueError(f"event times outside [0, {self.duration})")
            if x.min() < 0 or x.max() >= self.width or y.min() < 0 or y.max() >= self.height:
                raise ValueError("event coordinates outside the frame")
            if p.min() < 0 or p.max() > 1:
                raise ValueError("polarity must be 0 or 1")


def bin_events(stream: EventStream, t_steps: int) -> np.ndarray:
    """Partition events into T equal windows of per-pixel counts.

    Returns float64 [T, 2, height, width]; polarity picks the channel.
    Window membership is floor(t * T / duration), which partitions exactly
    and conserves the event count for any T <= duration.
    """
    if t_steps < 1:
        raise ValueError(f"need at least one frame, got {t_steps}")
    if t_steps > stream.duration:
        raise ValueError(
            f"cannot bin duration {stream.duration} into {t_steps} frames"
        )
    out = np.zeros((t_steps, 2, stream.height, stream.width), dtype=np.float64)
    if stream.events.size:
        t, x, y, p = stream.events.T
        frame = (t * t_steps) // stream.duration
        np.add.at(out, (frame, p, y, x), 1.0)
    return out


def event_stream_to_text(stream: EventStream) -> str:
    """Plain-text form: a header comment, then one 't x y p' line per event."""
    lines = [f"# duration={stream.duration} width={stream.width} height={stream.height}"]
    for t, x, y, p in stream.events:
        lines.append(f"{t} {x} {y} {p}")
    return "\n".join(lines) + "\n"


def event_stream_from_text(text: str) -> EventStream:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise DataFormatError("event text must start with a '# duration=... width=... height=...' header")
    meta = {}
    for token in lines[0].lstrip("#").split():
        key, _, val = token.partition("=")
        meta[key] = int(val)
    try:
        duration, width, height = meta["duration"], meta["width"], meta["height"]
    except KeyError as e:
        raise DataFormatError(f"event header missing field {e}") from None
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise DataFormatError(f"event line needs 4 fields 't x y p', got {ln!r}")
        rows.append([int(v) for v in parts])
    events = np.array(rows, dtype=np.int64) if rows else np.zeros((0, 4), dtype=np.int64)
    return EventStream(events=events, duration=duration, width=width, height=height)


def synth_events(pattern: str, n_samples: int, frame=(12, 12), duration: int = 16,
                 seed: int = 0, test_fraction: float = 0.25) -> Dataset:
    """Two-class synthetic event streams where the class is the motion direction.

    'moving-bar': a one-column vertical bar sweeps left-to-right (class 0) or
    right-to-left (class 1) with wraparound and a random phase; each step
    emits ON events at the new column and OFF events at the old one, so
    per-frame event counts are identical across classes and steps. A
    time-collapsed binning is class-uninformative by construction.

    'two-class-rotation': a dot orbits an 8-position circle clockwise or
    counter-clockwise, again emitting one ON and one OFF event per step.
    """
    height, width = frame
    if height < 2 or width < 2:
        raise ValueError(f"frame too small: {frame}")
    if duration < 2:
        raise ValueError(f"duration must be >= 2, got {duration}")
    rng = np.random.default_rng(seed)
    streams = []
    labels = rng.integers(0, 2, size=n_samples).astype(np.int64)
    for i in range(n_samples):
        direction = 1 if labels[i] == 0 else -1
        rows = []
        if pattern == "moving-bar":
            phase = int(rng.integers(0, width))
            for t in range(duration):
                col = (phase + direction * t) % width
                prev = (phase + direction * (t - 1)) % width
                for y in range(height):
                    rows.append([t, col, y, 1])
                    rows.append([t, prev, y, 0])
        elif pattern == "two-class-rotation":
            n_pos = 8
            cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
            radius = min(cx, cy) * 0.8
            phase = int(rng.integers(0, n_pos))
            def pos(step):
                ang = 2.0 * np.pi * ((phase + direction * step) % n_pos) / n_pos
                return (int(round(cx + radius * np.cos(ang))),
                        int(round(cy + radius * np.sin(ang))))
            for t in range(duration):
                x1, y1 = pos(t)
                x0, y0 = pos(t - 1)
                rows.append([t, x1, y1, 1])
                rows.append([t, x0, y0, 0])
        else:
            raise ValueError(f"unknown event pattern {pattern!r}")
        streams.append(EventStream(
            events=np.array(rows, dtype=np.int64),
            duration=duration, width=width, height=height,
        ))
    n_test = int(round(n_samples * test_fraction))
    n_train = n_samples - n_test
    return Dataset(
        kind="event-streams", inputs=streams, labels=labels,
        train_idx=np.arange(n_train),
        test_idx=np.arange(n_train, n_samples),
        num_classes=2,
    )


def save_event_dataset(ds: Dataset, out_dir, config: dict | None = None) -> None:
    """Write one text file per stream plus a manifest with labels and splits."""
    if ds.kind != "event-streams":
        raise ValueError("save_event_dataset needs an event-streams dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, stream in enumerate(ds.inputs):
        name = f"events_{i:05d}.txt"
        (out / name).write_text(event_stream_to_text(stream), encoding="utf-8")
        files.append(name)
    first = ds.inputs[0] if ds.inputs else None
    manifest = {
        "kind": "event-streams",
        "files": files,
        "labels": ds.labels.tolist(),
        "train_idx": ds.train_idx.tolist(),
        "test_idx": ds.test_idx.tolist(),
        "num_classes": ds.num_classes,
        "frame": [first.height, first.width] if first else None,
        "duration": first.duration if first else None,
        "config": config,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_event_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise DataFormatError(f"{src} has no manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    streams = [
        event_stream_from_text((src / name).read_text(encoding="utf-8"))
        for name in manifest["files"]
    ]
    return Dataset(
        kind="event-streams", inputs=streams,
        labels=np.array(manifest["labels"], dtype=np.int64),
        train_idx=np.array(manifest["train_idx"], dtype=np.int64),
        test_idx=np.array(manifest["test_idx"], dtype=np.int64),
        num_classes=int(manifest["num_classes"]),
    )


def make_xor() -> Dataset:
    """The four XOR patterns as a 2-feature, 2-class toy task."""
    inputs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    labels = np.array([0, 1, 1, 0], dtype=np.int64)
    idx = np.arange(4)
    return Dataset(kind="static-images", inputs=inputs, labels=labels,
                   train_idx=idx, test_idx=np.array([], dtype=np.int64),
                   num_classes=2)
