"""Domain types, stream segmentation and dataset persistence.

Windows are fixed-length tri-axial acceleration slices (default 128 samples
at a nominal 32 ms spacing, about 4 s of motion). A window's identity is
``subject_id:t0_ms``; datasets reject duplicate identities so that merges
and selection reports stay unambiguous.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, MergeError, SchemaError

SAMPLE_INTERVAL_MS = 32
DEFAULT_WINDOW_SIZE = 128
DEFAULT_OVERLAP = 10


class Label(str, Enum):
    FALL = "fall"
    ADL = "adl"


class Source(str, Enum):
    BASE = "base"
    FEEDBACK = "feedback"


class Verdict(str, Enum):
    TP = "tp"
    FP = "fp"


class Provenance(str, Enum):
    ORIGINAL = "original"
    SELECTED = "selected"
    MERGED = "merged"


@dataclass(frozen=True)
class AccelSample:
    """One accelerometer reading: timestamp (ms) and acceleration (m/s^2)."""

    t: int
    x: float
    y: float
    z: float


@dataclass(eq=False)
class AccelWindow:
    """Fixed-length window of tri-axial acceleration.

    ``xyz`` has shape (n, 3) with columns x, y, z; it is made read-only on
    construction so windows can be shared freely across threads.
    """

    xyz: np.ndarray
    t0_ms: int
    subject_id: str
    label: Label
    activity: str | None = None
    source: Source = Source.BASE

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64)
        if self.xyz.ndim != 2 or self.xyz.shape[1] != 3 or self.xyz.shape[0] < 1:
            raise ConfigurationError(f"window array must be (n, 3), got {self.xyz.shape}")
        if not np.all(np.isfinite(self.xyz)):
            raise ConfigurationError("window contains non-finite values")
        self.xyz.setflags(write=False)
        self.label = Label(self.label)
        self.source = Source(self.source)

    @property
    def n(self) -> int:
        return self.xyz.shape[0]

    @property
    def uid(self) -> str:
        return f"{self.subject_id}:{self.t0_ms}"

    @property
    def digest(self) -> str:
        """Content hash of the sample array (used for feature caching)."""
        d = getattr(self, "_digest", None)
        if d is None:
            d = hashlib.blake2b(self.xyz.tobytes(), digest_size=16).hexdigest()
            self._digest = d
        return d

    def axis(self, i: int) -> np.ndarray:
        return self.xyz[:, i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccelWindow):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.t0_ms == other.t0_ms
            and self.label == other.label
            and self.activity == other.activity
            and self.source == other.source
            and self.xyz.shape == other.xyz.shape
            and bool(np.array_equal(self.xyz, other.xyz))
        )


@dataclass(eq=False)
class FeedbackSample:
    """A window the deployed detector alerted on, plus the user's verdict."""

    window: AccelWindow
    verdict: Verdict
    round: int

    def __post_init__(self):
        self.verdict = Verdict(self.verdict)
        if self.round < 1:
            raise ConfigurationError(f"feedback round must be >= 1, got {self.round}")
        expected = Label.FALL if self.verdict == Verdict.TP else Label.ADL
        if self.window.label != expected:
            raise ConfigurationError(
                f"verdict {self.verdict.value} inconsistent with window label {self.window.label.value}"
            )

    @property
    def uid(self) -> str:
        return self.window.uid

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeedbackSample):
            return NotImplemented
        return (
            self.verdict == other.verdict
            and self.round == other.round
            and self.window == other.window
        )


@dataclass(eq=False)
class Dataset:
    """An ordered collection of windows with unique identities."""

    windows: tuple[AccelWindow, ...]
    provenance: Provenance = Provenance.ORIGINAL

    def __post_init__(self):
        self.windows = tuple(self.windows)
        self.provenance = Provenance(self.provenance)
        seen: set[str] = set()
        for w in self.windows:
            if w.uid in seen:
                raise MergeError(f"duplicate window identity {w.uid!r} in dataset")
            seen.add(w.uid)

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def uids(self) -> set[str]:
        return {w.uid for w in self.windows}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.provenance == other.provenance
            and len(self.windows) == len(other.windows)
            and all(a == b for a, b in zip(self.windows, other.windows))
        )


def segment_stream(
    stream: Sequence[AccelSample],
    window_size: int = DEFAULT_WINDOW_SIZE,
    overlap: int = DEFAULT_OVERLAP,
    *,
    subject_id: str = "user",
    label: Label = Label.ADL,
    activity: str | None = None,
    source: Source = Source.FEEDBACK,
) -> list[AccelWindow]:
    """Cut a sample stream into overlapping fixed-length windows.

    Consecutive windows share exactly ``overlap`` samples; trailing samples
    that cannot fill a window are dropped. For a stream of length
    N >= window_size this yields floor((N - window_size) / stride) + 1
    windows with stride = window_size - overlap.
    """
    if window_size < 1:
        raise ConfigurationError(f"window_size must be positive, got {window_size}")
    if overlap < 0 or overlap >= window_size:
        raise ConfigurationError(
            f"overlap must satisfy 0 <= overlap < window_size, got overlap={overlap}, window_size={window_size}"
        )
    ts = [s.t for s in stream]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigurationError("stream timestamps must be strictly increasing")

    stride = window_size - overlap
    out: list[AccelWindow] = []
    for start in range(0, len(stream) - window_size + 1, stride):
        chunk = stream[start : start + window_size]
        xyz = np.array([[s.x, s.y, s.z] for s in chunk], dtype=np.float64)
        out.append(
            AccelWindow(
                xyz=xyz,
                t0_ms=chunk[0].t,
                subject_id=subject_id,
                label=label,
                activity=activity,
                source=source,
            )
        )
    return out


def smv(window: AccelWindow) -> np.ndarray:
    """Signal magnitude vector: per-sample Euclidean norm of the three axes."""
    return np.sqrt(np.sum(window.xyz * window.xyz, axis=1))


# ---------------------------------------------------------------------------
# Persistence. CSV column layout:
#   subject_id,label,activity,source,t0_ms,ax_0..ax_{n-1},ay_0..,az_0..
# Feedback files insert verdict,round after t0_ms. JSONL uses the same field
# names with ax/ay/az as arrays. Floats are written with repr() so that a
# save/load round trip is bit-exact.
# ---------------------------------------------------------------------------

_META_COLS = ["subject_id", "label", "activity", "source", "t0_ms"]
_FEEDBACK_COLS = ["verdict", "round"]


def _window_header(n: int, feedback: bool) -> list[str]:
    cols = list(_META_COLS)
    if feedback:
        cols += _FEEDBACK_COLS
    for axis in ("ax", "ay", "az"):
        cols += [f"{axis}_{i}" for i in range(n)]
    return cols


def _window_row(w: AccelWindow) -> list[str]:
    row = [w.subject_id, w.label.value, w.activity or "", w.source.value, str(w.t0_ms)]
    for col in range(3):
        row += [repr(float(v)) for v in w.xyz[:, col]]
    return row


def _uniform_length(windows: Iterable[AccelWindow]) -> int:
    lengths = {w.n for w in windows}
    if len(lengths) > 1:
        raise SchemaError(f"windows of mixed lengths {sorted(lengths)} cannot share one file")
    return lengths.pop() if lengths else DEFAULT_WINDOW_SIZE


def _parse_window_row(
    values: list[str], header_n: int, lineno: int, path: Path
) -> tuple[list[str], np.ndarray]:
    meta_len = len(values) - 3 * header_n
    expected_meta = meta_len  # caller validated total length already
    meta, raw = values[:expected_meta], values[expected_meta:]
    try:
        flat = np.array([float(v) for v in raw], dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"{path}:{lineno}: non-numeric sample value ({exc})") from None
    xyz = flat.reshape(3, header_n).T
    return meta, xyz


def save_dataset(dataset: Dataset, path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix == ".jsonl" else "csv")
    if fmt == "csv":
        n = _uniform_length(dataset.windows)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_window_header(n, feedback=False))
            for w in dataset.windows:
                writer.writerow(_window_row(w))
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for w in dataset.windows:
                fh.write(json.dumps(_window_json(w)) + "\n")
    else:
        raise ConfigurationError(f"unknown dataset format {fmt!r}")


def _window_json(w: AccelWindow, feedback: FeedbackSample | None = None) -> dict:
    rec = {
        "subject_id": w.subject_id,
        "label": w.label.value,
        "activity": w.activity,
        "source": w.source.value,
        "t0_ms": w.t0_ms,
    }
    if feedback is not None:
        rec["verdict"] = feedback.verdict.value
        rec["round"] = feedback.round
    rec["ax"] = [float(v) for v in w.xyz[:, 0]]
    rec["ay"] = [float(v) for v in w.xyz[:, 1]]
    rec["az"] = [float(v) for v in w.xyz[:, 2]]
    return rec


def _window_from_fields(
    subject_id: str, label: str, activity: str, source: str, t0_ms: str, xyz: np.ndarray,
    lineno: int, path: Path,
) -> AccelWindow:
    try:
        return AccelWindow(
            xyz=xyz,
            t0_ms=int(t0_ms),
            subject_id=subject_id,
            label=Label(label),
            activity=activity or None,
            source=Source(source),
        )
    except (ValueError, ConfigurationError) as exc:
        raise SchemaError(f"{path}:{lineno}: {exc}") from None


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix == ".jsonl" else "csv")
    if fmt == "jsonl":
        return Dataset(windows=tuple(_iter_jsonl_windows(path)), provenance=Provenance.ORIGINAL)
    if fmt != "csv":
        raise ConfigurationError(f"unknown dataset format {fmt!r}")

    windows: list[AccelWindow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return Dataset(windows=(), provenance=Provenance.ORIGINAL)
        n = _validate_header(header, path, feedback=False)
        for lineno, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(values)}"
                )
            meta, xyz = _parse_window_row(values, n, lineno, path)
            windows.append(_window_from_fields(*meta, xyz, lineno, path))
    return Dataset(windows=tuple(windows), provenance=Provenance.ORIGINAL)


def _validate_header(header: list[str], path: Path, feedback: bool) -> int:
    meta = _META_COLS + (_FEEDBACK_COLS if feedback else [])
    if header[: len(meta)] != meta:
        raise SchemaError(f"{path}:1: header must start with {','.join(meta)}")
    value_cols = len(header) - len(meta)
    if value_cols % 3 != 0 or value_cols == 0:
        raise SchemaError(
            f"{path}:1: expected 3*n sample columns, got {value_cols}"
        )
    n = value_cols // 3
    expected = _window_header(n, feedback)
    if header != expected:
        raise SchemaError(f"{path}:1: sample columns must be ax_0..az_{n - 1} in order")
    return n


def _iter_jsonl_windows(path: Path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            yield _window_from_json(rec, lineno, path)


def _window_from_json(rec: dict, lineno: int, path: Path) -> AccelWindow:
    try:
        ax, ay, az = rec["ax"], rec["ay"], rec["az"]
    except KeyError as exc:
        raise SchemaError(f"{path}:{lineno}: missing field {exc}") from None
    if not (len(ax) == len(ay) == len(az)):
        raise SchemaError(f"{path}:{lineno}: ax/ay/az lengths differ")
    xyz = np.column_stack(
        [np.asarray(ax, dtype=np.float64), np.asarray(ay, dtype=np.float64), np.asarray(az, dtype=np.float64)]
    )
    return _window_from_fields(
        rec.get("subject_id", ""), rec.get("label", ""), rec.get("activity") or "",
        rec.get("source", ""), str(rec.get("t0_ms", "")), xyz, lineno, path,
    )


def save_feedback(samples: Sequence[FeedbackSample], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix == ".jsonl" else "csv")
    if fmt == "jsonl":
        with open(path, "w") as fh:
            for s in samples:
                fh.write(json.dumps(_window_json(s.window, feedback=s)) + "\n")
        return
    if fmt != "csv":
        raise ConfigurationError(f"unknown feedback format {fmt!r}")
    n = _uniform_length([s.window for s in samples])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_window_header(n, feedback=True))
        for s in samples:
            row = _window_row(s.window)
            row[5:5] = [s.verdict.value, str(s.round)]
            writer.writerow(row)


def load_feedback(path: str | Path, format: str | None = None) -> list[FeedbackSample]:
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix == ".jsonl" else "csv")
    samples: list[FeedbackSample] = []
    if fmt == "jsonl":
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from None
                window = _window_from_json(rec, lineno, path)
                samples.append(_feedback_from_fields(window, rec.get("verdict", ""), rec.get("round", ""), lineno, path))
        return samples
    if fmt != "csv":
        raise ConfigurationError(f"unknown feedback format {fmt!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        n = _validate_header(header, path, feedback=True)
        for lineno, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(values)}"
                )
            meta, xyz = _parse_window_row(values, n, lineno, path)
            subject_id, label, activity, source, t0_ms, verdict, rnd = meta
            window = _window_from_fields(subject_id, label, activity, source, t0_ms, xyz, lineno, path)
            samples.append(_feedback_from_fields(window, verdict, rnd, lineno, path))
    return samples


def _feedback_from_fields(window: AccelWindow, verdict: str, rnd, lineno: int, path: Path) -> FeedbackSample:
    try:
        return FeedbackSample(window=window, verdict=Verdict(verdict), round=int(rnd))
    except (ValueError, ConfigurationError) as exc:
        raise SchemaError(f"{path}:{lineno}: {exc}") from None
