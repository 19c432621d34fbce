from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from situlabel.stream import (
    CSV_HEADER,
    ActivityLabel,
    CsvParseError,
    LabelEvent,
    SensorFrame,
    StreamBundle,
    StreamMeta,
    emit_csv,
    format_value,
    fuse,
    parse_csv,
    resample_hold,
)

from oracles import forward_fill_bruteforce

META = StreamMeta(user="u0", mechanism="three_button")


def frame(t, az=9.81, **kw):
    return SensorFrame(t, (0.0, 0.0, az), (0.0, 0.0, 0.0), (20.0, 0.0, 40.0))


def q6(x: float) -> float:
    # quantize to the canonical CSV precision
    return float(format_value(x))


# ---------------------------------------------------------------------------
# parse_csv
# ---------------------------------------------------------------------------


def test_parse_single_row():
    text = CSV_HEADER + "\n0,0,0,9.81,0,0,0,20,0,40,1\n"
    bundle = parse_csv(text, meta=META)
    samples = bundle.samples()
    assert len(samples) == 1
    assert samples[0].label == ActivityLabel.WALKING
    assert samples[0].frame.accel == (0.0, 0.0, 9.81)


def test_parse_header_only():
    bundle = parse_csv(CSV_HEADER + "\n", meta=META)
    assert bundle.frames == ()
    assert bundle.events == ()
    assert bundle.samples() == []


def test_parse_non_monotone_timestamp_names_line():
    rows = ["0,0,0,9.81,0,0,0,20,0,40,1",
            "10,0,0,9.81,0,0,0,20,0,40,1",
            "10,0,0,9.81,0,0,0,20,0,40,1"]
    text = CSV_HEADER + "\n" + "\n".join(rows) + "\n"
    with pytest.raises(CsvParseError, match="non-monotone timestamp at line 4"):
        parse_csv(text)


@pytest.mark.parametrize(
    "row,message",
    [
        ("0,0,0,9.81,0,0,0,20,0,1", "wrong field count at line 2"),
        ("0,0,0,abc,0,0,0,20,0,40,1", "non-numeric value at line 2"),
        ("0,0,0,9.81,0,0,0,20,0,40,3", "label out of range at line 2"),
        ("0,0,0,9.81,0,0,0,20,0,40,-2", "label out of range at line 2"),
    ],
)
def test_parse_malformed_rows(row, message):
    with pytest.raises(CsvParseError, match=message):
        parse_csv(CSV_HEADER + "\n" + row + "\n")


def test_parse_bad_header():
    with pytest.raises(CsvParseError, match="bad header"):
        parse_csv("time,ax\n")


def test_parse_unlabelled_rows_retained():
    rows = ["0,0,0,9.81,0,0,0,20,0,40,-1",
            "10,0,0,9.81,0,0,0,20,0,40,-1",
            "20,0,0,9.81,0,0,0,20,0,40,2"]
    bundle = parse_csv(CSV_HEADER + "\n" + "\n".join(rows) + "\n", meta=META)
    samples = bundle.samples()
    assert [s.label_code for s in samples] == [-1, -1, 2]
    assert len(bundle.events) == 1 and bundle.events[0].t_ms == 20


# ---------------------------------------------------------------------------
# emit_csv round trip
# ---------------------------------------------------------------------------


def test_emit_empty_bundle_is_header_only():
    bundle = StreamBundle((), (), META)
    assert emit_csv(bundle) == CSV_HEADER + "\n"


def test_emit_single_sample_round_trip():
    bundle = StreamBundle(
        (frame(0),), (LabelEvent(0, ActivityLabel.WALKING, META.mechanism),), META
    )
    text = emit_csv(bundle)
    assert text.splitlines()[0] == CSV_HEADER
    assert parse_csv(text, meta=META) == bundle


def _canonical_bundle(times, values, change_points):
    frames = tuple(
        SensorFrame(t, tuple(v[0:3]), tuple(v[3:6]), tuple(v[6:9]))
        for t, v in zip(times, values)
    )
    events = tuple(
        LabelEvent(times[idx], ActivityLabel(lab), META.mechanism)
        for idx, lab in change_points
    )
    return StreamBundle(frames, events, META)


@st.composite
def canonical_bundles(draw):
    n = draw(st.integers(min_value=0, max_value=40))
    steps = draw(st.lists(st.integers(1, 500), min_size=n, max_size=n))
    times = list(np.cumsum(steps)) if n else []
    times = [int(t) for t in times]
    values = [
        [q6(draw(st.floats(-1000, 1000, allow_nan=False))) for _ in range(9)]
        for _ in range(n)
    ]
    if n:
        k = draw(st.integers(0, min(4, n)))
        idxs = sorted(draw(st.sets(st.integers(0, n - 1), min_size=k, max_size=k)))
        labels = []
        prev = None
        for _ in idxs:
            lab = draw(st.sampled_from([0, 1, 2]))
            if lab == prev:
                lab = (lab + 1) % 3
            labels.append(lab)
            prev = lab
        change_points = list(zip(idxs, labels))
    else:
        change_points = []
    return _canonical_bundle(times, values, change_points)


@given(canonical_bundles())
@settings(max_examples=60)
def test_round_trip_property(bundle):
    assert parse_csv(emit_csv(bundle), meta=META) == bundle


def test_round_trip_thousand_samples():
    rng = np.random.default_rng(7)
    times = np.cumsum(rng.integers(1, 40, size=1000)).tolist()
    values = [[q6(v) for v in rng.uniform(-100, 100, 9)] for _ in range(1000)]
    change_idx = sorted(rng.choice(1000, size=12, replace=False).tolist())
    labels = []
    prev = None
    for _ in change_idx:
        lab = int(rng.integers(0, 3))
        if lab == prev:
            lab = (lab + 1) % 3
        labels.append(lab)
        prev = lab
    bundle = _canonical_bundle(times, values, list(zip(change_idx, labels)))
    assert parse_csv(emit_csv(bundle), meta=META) == bundle


# ---------------------------------------------------------------------------
# resample_hold
# ---------------------------------------------------------------------------


def _uniform_frames(n, dt_ms, start=0):
    return tuple(frame(start + i * dt_ms, az=9.81 + i) for i in range(n))


def test_resample_identity_at_same_rate():
    frames = _uniform_frames(10, 20)
    assert resample_hold(frames, 50.0) == frames


def test_resample_downsample_keeps_every_second_frame():
    frames = _uniform_frames(10, 10)  # 100 Hz
    out = resample_hold(frames, 50.0)
    assert [f.t_ms for f in out] == [0, 20, 40, 60, 80]
    assert [f.accel[2] for f in out] == [frames[i].accel[2] for i in (0, 2, 4, 6, 8)]


def test_resample_irregular_short_span_single_output():
    frames = (frame(0, az=1.0), frame(7, az=2.0), frame(23, az=3.0))
    out = resample_hold(frames, 10.0)  # 100 ms spacing exceeds the 23 ms span
    assert len(out) == 1
    assert out[0].t_ms == 0
    assert out[0].accel[2] == 1.0


def test_resample_values_come_from_input_no_interpolation():
    rng = np.random.default_rng(0)
    times = np.cumsum(rng.integers(5, 50, size=30))
    frames = tuple(frame(int(t), az=float(rng.normal())) for t in times)
    out = resample_hold(frames, 40.0)
    input_vals = {f.accel[2] for f in frames}
    assert all(f.accel[2] in input_vals for f in out)
    diffs = np.diff([f.t_ms for f in out])
    assert np.all(np.abs(diffs - 25.0) <= 1)  # arithmetic progression mod rounding


def test_resample_empty_input_errors():
    with pytest.raises(ValueError):
        resample_hold((), 50.0)


# ---------------------------------------------------------------------------
# fuse
# ---------------------------------------------------------------------------


def test_fuse_forward_fill():
    frames = tuple(frame(t) for t in range(20))
    events = (
        LabelEvent(0, ActivityLabel.WALKING, "m"),
        LabelEvent(10, ActivityLabel.UPSTAIRS, "m"),
    )
    labels = [s.label for s in fuse(frames, events)]
    assert labels[:10] == [ActivityLabel.WALKING] * 10
    assert labels[10:] == [ActivityLabel.UPSTAIRS] * 10


def test_fuse_no_events_all_unlabelled():
    frames = tuple(frame(t) for t in range(5))
    assert all(s.label is None for s in fuse(frames, ()))


def test_fuse_event_exactly_at_frame_takes_new_label():
    frames = (frame(5),)
    events = (LabelEvent(5, ActivityLabel.DOWNSTAIRS, "m"),)
    assert fuse(frames, events)[0].label == ActivityLabel.DOWNSTAIRS


@given(
    st.lists(st.integers(0, 1000), min_size=0, max_size=30, unique=True),
    st.lists(st.tuples(st.integers(0, 1000), st.sampled_from([0, 1, 2])), max_size=10),
)
@settings(max_examples=100)
def test_fuse_matches_bruteforce(frame_times, raw_events):
    frame_times = sorted(frame_times)
    raw_events = sorted(raw_events)
    frames = tuple(frame(t) for t in frame_times)
    events = tuple(LabelEvent(t, ActivityLabel(l), "m") for t, l in raw_events)
    got = [s.label for s in fuse(frames, events)]
    expected = forward_fill_bruteforce(
        frame_times, [t for t, _ in raw_events],
        [ActivityLabel(l) for _, l in raw_events],
    )
    assert got == expected


def test_fuse_monotone_under_later_events():
    frames = tuple(frame(t) for t in range(0, 100, 5))
    events = (LabelEvent(10, ActivityLabel.WALKING, "m"),)
    before = [s.label for s in fuse(frames, events)]
    extended = events + (LabelEvent(60, ActivityLabel.UPSTAIRS, "m"),)
    after = [s.label for s in fuse(frames, extended)]
    for i, f in enumerate(frames):
        if f.t_ms < 60:
            assert before[i] == after[i]


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def test_bundle_rejects_non_monotone_frames():
    with pytest.raises(ValueError):
        StreamBundle((frame(5), frame(5)), (), META)


def test_frame_rejects_non_finite():
    with pytest.raises(ValueError):
        SensorFrame(0, (0.0, 0.0, float("nan")), (0.0,) * 3, (0.0,) * 3)


def test_meta_requires_user_and_rate():
    with pytest.raises(ValueError):
        StreamMeta(user="", mechanism="m")
    with pytest.raises(ValueError):
        StreamMeta(user="u", mechanism="m", sample_rate_hz=0)
