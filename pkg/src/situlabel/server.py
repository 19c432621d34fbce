"""Live-labelling session server speaking line-delimited JSON over WebSocket.

The server owns the mechanism state machine (the UI only renders echoes), so
live sessions and batch pipelines share one semantics implementation.

Wire protocol, one JSON object per line / per frame:
  client -> server
    {"type":"control","action":"start"|"stop","mechanism":<id>,
     "config":{...}?, "t_ms":<int>?}
    {"type":"input","t_ms":<int>,"kind":"button_down"|"button_up"|"force"|
     "slider"|"tap","value":<int-or-button-id>}
    {"type":"sensor","t_ms":<int>,"v":[9 numbers]}
  server -> client
    {"type":"state","label":<int|-1>,"led":"green"|"yellow"|"red"|"off",
     "recording":<bool>,"event":{"t_ms":<int>,"label":<int>}?}
    {"type":"sensor","t_ms":<int>,"v":[9 numbers]}   (simulated source only)
    {"type":"error","msg":<string>}

Timestamps are client-relative; the server rebases them to a zero-based
monotone timeline.  A state frame answers every accepted control/input
message; its optional "event" field reports a label emission verbatim.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from .mechanisms import (
    MECHANISM_IDS,
    InputEvent,
    SliderConfig,
    TouchConfig,
    TwoButtonConfig,
    VirtualAppMachine,
    make_machine,
)
from .simulate import default_gait, default_route, gen_activity_signal
from .stream import LabelEvent, SensorFrame, StreamBundle, StreamMeta, emit_csv

__all__ = ["LiveSession", "serve"]

log = logging.getLogger(__name__)


def _error(msg: str) -> dict:
    return {"type": "error", "msg": msg}


class LiveSession:
    """Protocol handler for one labelling session; transport-agnostic."""

    def __init__(self, out_path: str | Path, user: str = "live", rate_hz: float = 50.0):
        self.out_path = Path(out_path)
        self.user = user
        self.rate_hz = rate_hz
        self.recording = False
        self.machine = None
        self.mechanism: str | None = None
        self.frames: list[SensorFrame] = []
        self.events: list[LabelEvent] = []
        self._offset: int | None = None
        self._last_t = -1
        self._last_sensor_t = -1
        self.written: str | None = None

    # -- message handling ---------------------------------------------------

    def handle_line(self, line: str) -> list[dict]:
        line = line.strip()
        if not line:
            return []
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return [_error("malformed JSON")]
        if not isinstance(msg, dict):
            return [_error("message must be a JSON object")]
        return self.handle(msg)

    def handle(self, msg: dict) -> list[dict]:
        kind = msg.get("type")
        if kind == "control":
            return self._control(msg)
        if kind == "input":
            return self._input(msg)
        if kind == "sensor":
            return self._sensor(msg)
        return [_error(f"unknown message type {kind!r}")]

    def _rebase(self, t_ms: int) -> int:
        if self._offset is None:
            self._offset = t_ms
        rebased = t_ms - self._offset
        if rebased < 0:
            raise ValueError("timestamp precedes session start")
        return rebased

    def _control(self, msg: dict) -> list[dict]:
        action = msg.get("action")
        if action == "start":
            mechanism = msg.get("mechanism", self.mechanism or "app")
            if mechanism not in MECHANISM_IDS:
                return [_error(f"unknown mechanism {mechanism!r}")]
            if self.machine is None:
                try:
                    self.machine = self._build_machine(mechanism, msg.get("config") or {})
                except (TypeError, ValueError) as exc:
                    return [_error(f"bad mechanism config: {exc}")]
                self.mechanism = mechanism
            elif mechanism != self.mechanism:
                return [_error("mechanism already selected for this session")]
            if msg.get("t_ms") is not None:
                try:
                    self._rebase(int(msg["t_ms"]))
                except (TypeError, ValueError) as exc:
                    return [_error(f"bad control message: {exc}")]
            self.recording = True
            if isinstance(self.machine, VirtualAppMachine):
                self.machine.control("start")
            return [self._state()]
        if action == "stop":
            if not self.recording and self.machine is None:
                return [_error("session was never started")]
            t_end = msg.get("t_ms")
            if t_end is not None:
                try:
                    t_end = self._rebase(int(t_end))
                except ValueError as exc:
                    return [_error(str(exc))]
            else:
                t_end = self._last_t
            emitted = self.machine.flush(t_end) if self.machine else None
            if emitted is not None:
                self.events.append(emitted)
            if isinstance(self.machine, VirtualAppMachine):
                self.machine.control("stop")
            self.recording = False
            self._write_csv()
            return [self._state(emitted)]
        return [_error(f"unknown control action {action!r}")]

    @staticmethod
    def _build_machine(mechanism: str, config: dict):
        kwargs = {}
        if "two_button" in config:
            kwargs["two_button"] = TwoButtonConfig(**config["two_button"])
        if "touch" in config:
            kwargs["touch"] = TouchConfig(**config["touch"])
        if "slider" in config:
            kwargs["slider"] = SliderConfig(**config["slider"])
        return make_machine(mechanism, **kwargs)

    def _input(self, msg: dict) -> list[dict]:
        if self.machine is None:
            return [_error("no session: send control start first")]
        is_app = isinstance(self.machine, VirtualAppMachine)
        if not self.recording and not is_app:
            return [_error("not recording")]
        try:
            t_ms = self._rebase(int(msg["t_ms"]))
            if t_ms < self._last_t:
                return [_error("input timestamp went backwards")]
            event = InputEvent(t_ms, msg["kind"], msg["value"])
        except (KeyError, TypeError, ValueError) as exc:
            return [_error(f"bad input message: {exc}")]
        try:
            emitted = self.machine.step(event)
        except ValueError as exc:
            return [_error(str(exc))]
        self._last_t = t_ms
        if emitted is not None:
            self.events.append(emitted)
        return [self._state(emitted)]

    def _sensor(self, msg: dict) -> list[dict]:
        if not self.recording:
            return [_error("not recording")]
        v = msg.get("v")
        if not isinstance(v, list) or len(v) != 9:
            return [_error("sensor message needs v with 9 numbers")]
        try:
            t_ms = self._rebase(int(msg["t_ms"]))
            values = [float(x) for x in v]
            if t_ms <= self._last_sensor_t:
                return [_error("sensor timestamp not increasing")]
            frame = SensorFrame(t_ms, tuple(values[0:3]), tuple(values[3:6]),
                                tuple(values[6:9]))
        except (KeyError, TypeError, ValueError) as exc:
            return [_error(f"bad sensor message: {exc}")]
        self._last_sensor_t = t_ms
        self._last_t = max(self._last_t, t_ms)
        self.frames.append(frame)
        return []

    # -- session state ------------------------------------------------------

    def _state(self, emitted: LabelEvent | None = None) -> dict:
        label = int(self.events[-1].label) if self.events else -1
        led = self.machine.led if self.machine else "off"
        out = {"type": "state", "label": label, "led": led, "recording": self.recording}
        if emitted is not None:
            out["event"] = {"t_ms": emitted.t_ms, "label": int(emitted.label)}
        return out

    def _write_csv(self) -> None:
        bundle = StreamBundle(
            frames=tuple(self.frames),
            events=tuple(self.events),
            meta=StreamMeta(self.user, self.mechanism or "unknown", self.rate_hz),
        )
        self.out_path.parent.mkdir(parents=True, exist_ok=True)
        self.out_path.write_text(emit_csv(bundle))
        self.written = str(self.out_path)


async def _sim_sensor_task(session: LiveSession, send_queue: asyncio.Queue,
                           rate_hz: float, seed: int) -> None:
    """Stream synthetic frames in near real time while recording."""
    import numpy as np

    rng = np.random.default_rng(seed)
    gait = default_gait()
    route = default_route()
    t_ms = 0
    chunk_s = 0.5
    while True:
        for seg in route.segments:
            remaining = seg.duration_s
            while remaining > 0:
                step = min(chunk_s, remaining)
                if session.recording:
                    frames = gen_activity_signal(
                        seg.activity, step, gait, rate_hz, t0_ms=t_ms, rng=rng
                    )
                    for f in frames:
                        msg = {"type": "sensor", "t_ms": f.t_ms, "v": list(f.values())}
                        session.handle(msg)
                        await send_queue.put(msg)
                    t_ms += int(round(step * 1000))
                remaining -= step
                await asyncio.sleep(step)


async def _handle_connection(ws, session: LiveSession, sensor_source: str,
                             rate_hz: float, seed: int, done: asyncio.Event) -> None:
    in_queue: asyncio.Queue = asyncio.Queue()
    out_queue: asyncio.Queue = asyncio.Queue()

    async def reader() -> None:
        async for message in ws:
            for line in str(message).splitlines():
                await in_queue.put(line)
        await in_queue.put(None)

    async def processor() -> None:
        while True:
            line = await in_queue.get()
            if line is None:
                await out_queue.put(None)
                return
            for reply in session.handle_line(line):
                await out_queue.put(json.dumps(reply))

    async def writer() -> None:
        while True:
            item = await out_queue.get()
            if item is None:
                return
            await ws.send(item)

    tasks = [asyncio.create_task(reader()), asyncio.create_task(processor()),
             asyncio.create_task(writer())]
    if sensor_source == "sim":
        tasks.append(asyncio.create_task(
            _sim_sensor_task(session, out_queue, rate_hz, seed)))
    try:
        await asyncio.gather(*tasks[:3])
    finally:
        for t in tasks:
            t.cancel()
        done.set()


async def serve(port: int, out_path: str | Path, mechanism: str = "app",
                sensor_source: str = "client", rate_hz: float = 50.0,
                seed: int = 0, host: str = "127.0.0.1",
                ready: asyncio.Event | None = None,
                port_holder: list | None = None) -> str | None:
    """Run one labelling session; returns the written CSV path on stop."""
    import websockets

    session = LiveSession(out_path, rate_hz=rate_hz)
    session.mechanism = None
    busy = False
    done = asyncio.Event()

    async def handler(ws):
        nonlocal busy
        if busy:
            await ws.send(json.dumps(_error("session in progress")))
            await ws.close()
            return
        busy = True
        try:
            await _handle_connection(ws, session, sensor_source, rate_hz, seed, done)
        finally:
            busy = False

    async with websockets.serve(handler, host, port) as server:
        actual_port = server.sockets[0].getsockname()[1]
        if port_holder is not None:
            port_holder.append(actual_port)
        log.info("listening on ws://%s:%s", host, actual_port)
        if ready is not None:
            ready.set()
        await done.wait()
    return session.written
