"""Canonical data model for timestamped sensor streams and label events.

Streams are immutable value objects: a bundle pairs ordered 9-channel sensor
frames with the sparse label events a labelling mechanism produced, and the
fusion rule (forward fill) turns the two into per-frame labelled samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator

__all__ = [
    "ActivityLabel",
    "UNLABELLED",
    "CSV_HEADER",
    "CHANNELS",
    "SensorFrame",
    "LabelEvent",
    "LabelledSample",
    "StreamMeta",
    "StreamBundle",
    "CsvParseError",
    "parse_csv",
    "emit_csv",
    "resample_hold",
    "fuse",
    "format_value",
]


class ActivityLabel(IntEnum):
    """The three activity classes; integer codes are stable across serialization."""

    DOWNSTAIRS = 0
    WALKING = 1
    UPSTAIRS = 2


#: Label column sentinel for frames recorded before any label event.
UNLABELLED = -1

#: Compatibility contract shared with the CLI and the live-labelling UI.
CSV_HEADER = "t_ms,ax,ay,az,gx,gy,gz,mx,my,mz,label"

#: Channel order used everywhere a frame is flattened to 9 values.
CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz")


@dataclass(frozen=True)
class SensorFrame:
    """One 9-DOF reading: accel in m/s^2, gyro in deg/s, mag in uT."""

    t_ms: int
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    mag: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise ValueError(f"negative timestamp {self.t_ms}")
        for v in self.values():
            if not math.isfinite(v):
                raise ValueError(f"non-finite sensor value in frame at t={self.t_ms}")

    def values(self) -> tuple[float, ...]:
        return self.accel + self.gyro + self.mag


@dataclass(frozen=True)
class LabelEvent:
    """A discrete label emission from a mechanism at time t_ms."""

    t_ms: int
    label: ActivityLabel
    mechanism: str


@dataclass(frozen=True)
class LabelledSample:
    """A frame plus the forward-filled label; None means no label yet."""

    frame: SensorFrame
    label: ActivityLabel | None

    @property
    def label_code(self) -> int:
        return UNLABELLED if self.label is None else int(self.label)


@dataclass(frozen=True)
class StreamMeta:
    user: str
    mechanism: str
    sample_rate_hz: float = 50.0

    def __post_init__(self) -> None:
        if not self.user:
            raise ValueError("user id must be non-empty")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")


@dataclass(frozen=True)
class StreamBundle:
    """Ordered frames plus ordered label events for one recording session."""

    frames: tuple[SensorFrame, ...]
    events: tuple[LabelEvent, ...]
    meta: StreamMeta

    def __post_init__(self) -> None:
        for a, b in zip(self.frames, self.frames[1:]):
            if b.t_ms <= a.t_ms:
                raise ValueError(f"frame timestamps not strictly increasing at t={b.t_ms}")
        for a, b in zip(self.events, self.events[1:]):
            if b.t_ms < a.t_ms:
                raise ValueError(f"event timestamps decrease at t={b.t_ms}")

    def samples(self) -> list[LabelledSample]:
        return fuse(self.frames, self.events)

    @property
    def duration_s(self) -> float:
        if not self.frames:
            return 0.0
        return (self.frames[-1].t_ms - self.frames[0].t_ms) / 1000.0


class CsvParseError(ValueError):
    """Raised for malformed CSV input; the message names the offending line."""


def format_value(x: float) -> str:
    """Render a channel value at the canonical 6-significant-digit precision."""
    return f"{x:.6g}"


def _parse_row(line: str, lineno: int) -> tuple[int, tuple[float, ...], int]:
    parts = line.split(",")
    if len(parts) != 11:
        raise CsvParseError(f"wrong field count at line {lineno}")
    try:
        t_ms = int(parts[0])
        values = tuple(float(p) for p in parts[1:10])
        label = int(parts[10])
    except ValueError:
        raise CsvParseError(f"non-numeric value at line {lineno}") from None
    if not all(math.isfinite(v) for v in values):
        raise CsvParseError(f"non-finite value at line {lineno}")
    if label not in (UNLABELLED, 0, 1, 2):
        raise CsvParseError(f"label out of range at line {lineno}")
    return t_ms, values, label


def parse_csv(text: str | Iterable[str], meta: StreamMeta | None = None) -> StreamBundle:
    """Parse the canonical CSV format into a bundle.

    Label events are reconstructed at the rows where the label column changes
    (the first labelled row included); rows labelled -1 are retained as
    unlabelled frames.  Raises CsvParseError naming the offending line.
    """
    if meta is None:
        meta = StreamMeta(user="unknown", mechanism="unknown")
    lines: Iterator[str] = iter(text.splitlines()) if isinstance(text, str) else iter(text)
    try:
        header = next(lines).rstrip("\n")
    except StopIteration:
        raise CsvParseError("empty input, missing header at line 1") from None
    if header != CSV_HEADER:
        raise CsvParseError(f"bad header at line 1: {header!r}")

    frames: list[SensorFrame] = []
    events: list[LabelEvent] = []
    last_t: int | None = None
    last_label = UNLABELLED
    for lineno, raw in enumerate(lines, start=2):
        line = raw.rstrip("\n")
        if not line:
            continue
        t_ms, values, label = _parse_row(line, lineno)
        if t_ms < 0:
            raise CsvParseError(f"negative timestamp at line {lineno}")
        if last_t is not None and t_ms <= last_t:
            raise CsvParseError(f"non-monotone timestamp at line {lineno}")
        last_t = t_ms
        frames.append(SensorFrame(t_ms, values[0:3], values[3:6], values[6:9]))
        if label != UNLABELLED and label != last_label:
            events.append(LabelEvent(t_ms, ActivityLabel(label), meta.mechanism))
        if label == UNLABELLED and last_label != UNLABELLED:
            # A labelled stream cannot go back to unlabelled under forward fill.
            raise CsvParseError(f"label regressed to -1 at line {lineno}")
        last_label = label
    return StreamBundle(tuple(frames), tuple(events), meta)


def emit_csv(bundle: StreamBundle) -> str:
    """Serialize a bundle to CSV text.

    The label column carries the fused (forward-filled) label per row, so the
    format is exact for bundles whose events are label change-points aligned
    to frame timestamps (which is what parse_csv produces); duplicate
    same-label events are not representable and collapse on a round trip.
    """
    out = [CSV_HEADER]
    for sample in fuse(bundle.frames, bundle.events):
        f = sample.frame
        fields = [str(f.t_ms)]
        fields.extend(format_value(v) for v in f.values())
        fields.append(str(sample.label_code))
        out.append(",".join(fields))
    return "\n".join(out) + "\n"


def resample_hold(
    frames: Iterable[SensorFrame], target_rate_hz: float
) -> tuple[SensorFrame, ...]:
    """Resample to a uniform grid by zero-order hold.

    Output timestamps form an arithmetic progression (rounded to integer ms)
    starting at the first input timestamp and spanning the input duration;
    each output frame copies the most recent input at or before it.
    """
    frames = tuple(frames)
    if target_rate_hz <= 0:
        raise ValueError("target rate must be positive")
    if not frames:
        raise ValueError("cannot resample an empty stream")
    step_ms = 1000.0 / target_rate_hz
    t0 = frames[0].t_ms
    span = frames[-1].t_ms - t0
    count = int(math.floor(span / step_ms)) + 1
    out: list[SensorFrame] = []
    src = 0
    for i in range(count):
        t = t0 + round(i * step_ms)
        while src + 1 < len(frames) and frames[src + 1].t_ms <= t:
            src += 1
        held = frames[src]
        out.append(SensorFrame(t, held.accel, held.gyro, held.mag))
    return tuple(out)


def fuse(
    frames: Iterable[SensorFrame], events: Iterable[LabelEvent]
) -> list[LabelledSample]:
    """Forward-fill fusion: each frame takes the latest event at or before it."""
    events = tuple(events)
    samples: list[LabelledSample] = []
    idx = 0
    current: ActivityLabel | None = None
    for frame in frames:
        while idx < len(events) and events[idx].t_ms <= frame.t_ms:
            current = events[idx].label
            idx += 1
        samples.append(LabelledSample(frame, current))
    return samples
