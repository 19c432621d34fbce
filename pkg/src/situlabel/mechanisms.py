"""Deterministic state machines turning raw inputs into label events.

Five mechanisms are modelled: two-button (adjacent/opposite placement),
three-button, force-touch with LED level feedback, slide potentiometer with
hysteresis, and a virtual app with start/stop gating.  Machines are purely
event-driven: timed behaviour (simultaneity windows, hold thresholds) is
evaluated lazily on the next input, with an explicit end-of-stream flush.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .stream import ActivityLabel, LabelEvent

__all__ = [
    "InputEvent",
    "TwoButtonConfig",
    "TouchConfig",
    "SliderConfig",
    "LabelStats",
    "TwoButtonMachine",
    "ThreeButtonMachine",
    "TouchMachine",
    "SliderMachine",
    "VirtualAppMachine",
    "MECHANISM_IDS",
    "make_machine",
    "analyze_labels",
    "GoldenVector",
    "load_golden_vector",
    "replay_golden_vector",
]

_RAW_MAX = 1023

INPUT_KINDS = ("button_down", "button_up", "force", "slider", "tap")


@dataclass(frozen=True)
class InputEvent:
    """A raw user interaction: button edge, analog reading, or virtual tap."""

    t_ms: int
    kind: str
    value: str | int

    def __post_init__(self) -> None:
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind in ("force", "slider"):
            if not isinstance(self.value, int) or not 0 <= self.value <= _RAW_MAX:
                raise ValueError(f"{self.kind} reading must be an int in 0..{_RAW_MAX}")
        if self.kind == "tap" and int(self.value) not in (0, 1, 2):
            raise ValueError("tap value must be a label code 0..2")


@dataclass(frozen=True)
class TwoButtonConfig:
    simultaneity_window_ms: int = 150
    lockout_ms: int = 400
    placement: str = "adjacent"  # "adjacent" | "opposite"

    def __post_init__(self) -> None:
        if self.simultaneity_window_ms <= 0 or self.lockout_ms <= 0:
            raise ValueError("durations must be positive")
        if self.placement not in ("adjacent", "opposite"):
            raise ValueError(f"unknown placement {self.placement!r}")


@dataclass(frozen=True)
class TouchConfig:
    t1: int = 300
    t2: int = 600
    hold_ms: int = 200

    def __post_init__(self) -> None:
        if not 0 < self.t1 < self.t2 < _RAW_MAX:
            raise ValueError("thresholds must satisfy 0 < t1 < t2 < 1023")
        if self.hold_ms <= 0:
            raise ValueError("hold_ms must be positive")


@dataclass(frozen=True)
class SliderConfig:
    b1: int = 341
    b2: int = 682
    hysteresis_margin: int = 20

    def __post_init__(self) -> None:
        if not 0 < self.b1 < self.b2 < _RAW_MAX:
            raise ValueError("boundaries must satisfy 0 < b1 < b2 < 1023")
        if self.hysteresis_margin < 0 or self.hysteresis_margin >= (self.b2 - self.b1) / 2:
            raise ValueError("margin must be >= 0 and < (b2-b1)/2")


class TwoButtonMachine:
    """Two buttons: A alone = Upstairs, B alone = Downstairs, both = Walking.

    A button_down opens a simultaneity window; the other button going down
    within it emits Walking, otherwise the window's expiry emits the single
    button's label.  Every emission starts a lockout during which all input
    is consumed without effect (the anti-mislabel delay).
    """

    BUTTONS = {"a": ActivityLabel.UPSTAIRS, "b": ActivityLabel.DOWNSTAIRS}

    def __init__(self, config: TwoButtonConfig | None = None, mechanism: str | None = None):
        self.config = config or TwoButtonConfig()
        self.mechanism = mechanism or f"two_button_{self.config.placement}"
        self._pending: tuple[str, int] | None = None  # (button id, down time)
        self._lockout_until = 0
        self._last_t = 0

    @property
    def led(self) -> str:
        return "off"

    def _emit(self, label: ActivityLabel, t_ms: int) -> LabelEvent:
        self._lockout_until = t_ms + self.config.lockout_ms
        self._pending = None
        return LabelEvent(t_ms, label, self.mechanism)

    def _expire(self, t_now: int) -> LabelEvent | None:
        if self._pending is None:
            return None
        button, t_down = self._pending
        deadline = t_down + self.config.simultaneity_window_ms
        if t_now > deadline:
            return self._emit(self.BUTTONS[button], deadline)
        return None

    def step(self, event: InputEvent) -> LabelEvent | None:
        if event.kind not in ("button_down", "button_up"):
            raise ValueError(f"two-button machine got {event.kind!r}")
        if event.value not in self.BUTTONS:
            raise ValueError(f"unknown button {event.value!r}")
        if event.t_ms < self._last_t:
            raise ValueError("events must not go backwards in time")
        self._last_t = event.t_ms

        expired = self._expire(event.t_ms)
        if event.t_ms < self._lockout_until:
            return expired  # input consumed during lockout
        if event.kind == "button_down":
            if self._pending is not None and self._pending[0] != event.value:
                return self._emit(ActivityLabel.WALKING, event.t_ms)
            if self._pending is None:
                self._pending = (str(event.value), event.t_ms)
        # button_up keeps the pending press alive: a short click still labels
        # at window expiry, and Walking is decided by down-times alone.
        return expired

    def flush(self, t_end: int | None = None) -> LabelEvent | None:
        if self._pending is None:
            return None
        button, t_down = self._pending
        return self._emit(self.BUTTONS[button], t_down + self.config.simultaneity_window_ms)


class ThreeButtonMachine:
    """One button per label; a press emits immediately, no delay or lockout."""

    BUTTONS = {
        "up": ActivityLabel.UPSTAIRS,
        "down": ActivityLabel.DOWNSTAIRS,
        "walk": ActivityLabel.WALKING,
    }

    def __init__(self, mechanism: str = "three_button"):
        self.mechanism = mechanism

    @property
    def led(self) -> str:
        return "off"

    def step(self, event: InputEvent) -> LabelEvent | None:
        if event.kind not in ("button_down", "button_up"):
            raise ValueError(f"three-button machine got {event.kind!r}")
        if event.value not in self.BUTTONS:
            raise ValueError(f"unknown button {event.value!r}")
        if event.kind == "button_down":
            return LabelEvent(event.t_ms, self.BUTTONS[str(event.value)], self.mechanism)
        return None

    def flush(self, t_end: int | None = None) -> LabelEvent | None:
        return None


class TouchMachine:
    """Force sensor with three level bands and hold-to-emit.

    Levels map to labels light->Walking, medium->Downstairs, hard->Upstairs.
    A level continuously held for hold_ms emits once, timestamped at
    level-entry + hold_ms; a raw reading of 0 resets to no-level.  The LED is
    a pure function of the current level (green/yellow/red, off at no-level).
    """

    LEVEL_LABELS = {
        0: ActivityLabel.WALKING,
        1: ActivityLabel.DOWNSTAIRS,
        2: ActivityLabel.UPSTAIRS,
    }
    LEVEL_LEDS = {None: "off", 0: "green", 1: "yellow", 2: "red"}

    def __init__(self, config: TouchConfig | None = None, mechanism: str = "touch"):
        self.config = config or TouchConfig()
        self.mechanism = mechanism
        self._level: int | None = None
        self._entry_t = 0
        self._emitted = False

    @property
    def led(self) -> str:
        return self.LEVEL_LEDS[self._level]

    def _level_of(self, raw: int) -> int | None:
        if raw == 0:
            return None
        if raw < self.config.t1:
            return 0
        if raw < self.config.t2:
            return 1
        return 2

    def _settle(self, t_now: int) -> LabelEvent | None:
        # Readings are zero-order held, so the current level persisted from
        # its entry until t_now; emit if that covers the hold duration.
        if self._level is None or self._emitted:
            return None
        if t_now - self._entry_t >= self.config.hold_ms:
            self._emitted = True
            return LabelEvent(
                self._entry_t + self.config.hold_ms,
                self.LEVEL_LABELS[self._level],
                self.mechanism,
            )
        return None

    def step(self, event: InputEvent) -> LabelEvent | None:
        if event.kind != "force":
            raise ValueError(f"touch machine got {event.kind!r}")
        emitted = self._settle(event.t_ms)
        level = self._level_of(int(event.value))
        if level != self._level:
            self._level = level
            self._entry_t = event.t_ms
            self._emitted = False
        return emitted

    def flush(self, t_end: int | None = None) -> LabelEvent | None:
        if t_end is None:
            return None
        return self._settle(t_end)


class SliderMachine:
    """Slide potentiometer: left/middle/right zones with boundary hysteresis.

    Zone changes emit immediately (the middle zone needs no hold, so a sweep
    emits Walking whenever a reading lands there); leaving a zone requires
    crossing the boundary by the hysteresis margin, which suppresses chatter.
    """

    ZONE_LABELS = {
        0: ActivityLabel.DOWNSTAIRS,
        1: ActivityLabel.WALKING,
        2: ActivityLabel.UPSTAIRS,
    }

    def __init__(self, config: SliderConfig | None = None, mechanism: str = "slider"):
        self.config = config or SliderConfig()
        self.mechanism = mechanism
        self._zone: int | None = None

    @property
    def led(self) -> str:
        return "off"

    def _nominal_zone(self, raw: int) -> int:
        if raw < self.config.b1:
            return 0
        if raw < self.config.b2:
            return 1
        return 2

    def step(self, event: InputEvent) -> LabelEvent | None:
        if event.kind != "slider":
            raise ValueError(f"slider machine got {event.kind!r}")
        raw = int(event.value)
        zone = self._nominal_zone(raw)
        margin = self.config.hysteresis_margin
        if self._zone is None:
            self._zone = zone
            return LabelEvent(event.t_ms, self.ZONE_LABELS[zone], self.mechanism)
        if zone == self._zone:
            return None
        if zone > self._zone:
            # entering a higher zone: clear its lower boundary by the margin
            boundary = self.config.b1 if zone == 1 else self.config.b2
            if raw < boundary + margin:
                return None
        else:
            # entering a lower zone: drop below the boundary above it
            boundary = self.config.b2 if zone == 1 else self.config.b1
            if raw >= boundary - margin:
                return None
        self._zone = zone
        return LabelEvent(event.t_ms, self.ZONE_LABELS[zone], self.mechanism)

    def flush(self, t_end: int | None = None) -> LabelEvent | None:
        return None


class VirtualAppMachine:
    """Mobile-app style labelling: taps emit only while recording is started."""

    def __init__(self, mechanism: str = "app"):
        self.mechanism = mechanism
        self.recording = False

    @property
    def led(self) -> str:
        return "off"

    def control(self, action: str) -> None:
        if action == "start":
            self.recording = True
        elif action == "stop":
            self.recording = False
        else:
            raise ValueError(f"unknown control action {action!r}")

    def step(self, event: InputEvent) -> LabelEvent | None:
        if event.kind != "tap":
            raise ValueError(f"app machine got {event.kind!r}")
        if not self.recording:
            return None
        return LabelEvent(event.t_ms, ActivityLabel(int(event.value)), self.mechanism)

    def flush(self, t_end: int | None = None) -> LabelEvent | None:
        return None


MECHANISM_IDS = (
    "two_button_adjacent",
    "two_button_opposite",
    "three_button",
    "touch",
    "slider",
    "app",
)


def make_machine(
    mechanism: str,
    *,
    two_button: TwoButtonConfig | None = None,
    touch: TouchConfig | None = None,
    slider: SliderConfig | None = None,
):
    """Build a mechanism state machine by id, with optional config overrides."""
    if mechanism in ("two_button_adjacent", "two_button_opposite"):
        placement = mechanism.removeprefix("two_button_")
        cfg = two_button or TwoButtonConfig(placement=placement)
        if cfg.placement != placement:
            cfg = TwoButtonConfig(cfg.simultaneity_window_ms, cfg.lockout_ms, placement)
        return TwoButtonMachine(cfg, mechanism=mechanism)
    if mechanism == "three_button":
        return ThreeButtonMachine()
    if mechanism == "touch":
        return TouchMachine(touch)
    if mechanism == "slider":
        return SliderMachine(slider)
    if mechanism == "app":
        return VirtualAppMachine()
    raise ValueError(f"unknown mechanism {mechanism!r}")


@dataclass(frozen=True)
class LabelStats:
    """Labelling-rate analytics over one session's emitted events."""

    counts: dict[ActivityLabel, int]
    changes: int
    duration_s: float
    labels_per_min: float
    changes_per_min: float

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def analyze_labels(events: Sequence[LabelEvent], duration_s: float) -> LabelStats:
    """Per-label counts, change count and per-minute rates over duration_s."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    counts = {label: 0 for label in ActivityLabel}
    for e in events:
        counts[e.label] += 1
    changes = sum(1 for a, b in zip(events, events[1:]) if a.label != b.label)
    total = sum(counts.values())
    return LabelStats(
        counts=counts,
        changes=changes,
        duration_s=duration_s,
        labels_per_min=total * 60.0 / duration_s,
        changes_per_min=changes * 60.0 / duration_s,
    )


# ---------------------------------------------------------------------------
# Golden vectors: line-delimited JSON files pairing an input script with the
# exact emission sequence it must produce.  The same files are replayed by the
# UI test suite over the wire, so they are the cross-component contract.
#
# Line schema (one object per line):
#   {"type":"meta","mechanism":<id>,"config":{...}}      first line, config optional
#   {"type":"input","t_ms":int,"kind":<kind>,"value":<id|int>}
#   {"type":"control","t_ms":int,"action":"start"|"stop"}   app mechanism only
#   {"type":"flush","t_ms":int}                          end-of-stream flush
#   {"type":"expect","t_ms":int,"label":int}             expected emission
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldenVector:
    mechanism: str
    config: dict
    lines: tuple[dict, ...]

    @property
    def expected(self) -> list[LabelEvent]:
        return [
            LabelEvent(l["t_ms"], ActivityLabel(l["label"]), self.mechanism)
            for l in self.lines
            if l["type"] == "expect"
        ]


def load_golden_vector(path: str | Path) -> GoldenVector:
    lines = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                lines.append(json.loads(raw))
    if not lines or lines[0].get("type") != "meta":
        raise ValueError(f"golden vector {path} must start with a meta line")
    meta = lines[0]
    return GoldenVector(meta["mechanism"], meta.get("config", {}), tuple(lines[1:]))


def _machine_from_config(vec: GoldenVector):
    cfg = vec.config
    kwargs = {}
    if "two_button" in cfg:
        kwargs["two_button"] = TwoButtonConfig(**cfg["two_button"])
    if "touch" in cfg:
        kwargs["touch"] = TouchConfig(**cfg["touch"])
    if "slider" in cfg:
        kwargs["slider"] = SliderConfig(**cfg["slider"])
    return make_machine(vec.mechanism, **kwargs)


def replay_golden_vector(vec: GoldenVector) -> tuple[list[LabelEvent], list[LabelEvent]]:
    """Replay a vector through its machine; returns (emitted, expected)."""
    machine = _machine_from_config(vec)
    emitted: list[LabelEvent] = []
    for line in vec.lines:
        kind = line["type"]
        if kind == "input":
            out = machine.step(InputEvent(line["t_ms"], line["kind"], line["value"]))
            if out is not None:
                emitted.append(out)
        elif kind == "control":
            machine.control(line["action"])
        elif kind == "flush":
            out = machine.flush(line.get("t_ms"))
            if out is not None:
                emitted.append(out)
        elif kind == "expect":
            pass
        else:
            raise ValueError(f"unknown golden line type {kind!r}")
    return emitted, vec.expected
