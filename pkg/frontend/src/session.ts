/**
 * Session state store. The displayed label and LED always come from the last
 * server state frame (the server is authoritative; no label logic here), and
 * sensor frames accumulate in a bounded ring buffer for the live chart.
 */

import type {
  LedColour,
  MechanismId,
  SensorMessage,
  ServerMessage,
  StateFrame,
} from './protocol.js';

export type ConnectionStatus = 'disconnected' | 'connecting' | 'connected';

export interface LogEntry {
  at: number;
  text: string;
  kind: 'event' | 'error' | 'info';
}

export interface SensorPoint {
  t_ms: number;
  v: number[];
  label: number;
}

const MAX_LOG_ENTRIES = 200;

/** Fixed-capacity ring; oldest points drop when full. */
export class RingBuffer {
  private buf: (SensorPoint | null)[];
  private head = 0;
  private count = 0;

  constructor(readonly capacity: number) {
    this.buf = new Array(capacity).fill(null);
  }

  push(p: SensorPoint): void {
    this.buf[(this.head + this.count) % this.capacity] = p;
    if (this.count < this.capacity) {
      this.count += 1;
    } else {
      this.head = (this.head + 1) % this.capacity;
    }
  }

  get length(): number {
    return this.count;
  }

  toArray(): SensorPoint[] {
    const out: SensorPoint[] = [];
    for (let i = 0; i < this.count; i++) {
      out.push(this.buf[(this.head + i) % this.capacity] as SensorPoint);
    }
    return out;
  }
}

export class SessionState {
  status: ConnectionStatus = 'disconnected';
  mechanism: MechanismId | null = null;
  recording = false;
  label = -1;
  led: LedColour = 'off';
  lastEvent: { t_ms: number; label: number } | null = null;
  readonly trace: RingBuffer;
  readonly log: LogEntry[] = [];
  private listeners: (() => void)[] = [];

  constructor(traceCapacity = 50 * 60) {
    // one minute at 50 Hz; older frames scroll out of the chart
    this.trace = new RingBuffer(traceCapacity);
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.addLog('info', `connection ${status}`);
  }

  setMechanism(mechanism: MechanismId): void {
    this.mechanism = mechanism;
  }

  /** Apply one server message; state frames overwrite label/led verbatim. */
  apply(msg: ServerMessage): void {
    if (msg.type === 'state') {
      this.applyState(msg);
    } else if (msg.type === 'error') {
      this.addLog('error', msg.msg);
    } else {
      this.applySensor(msg);
    }
    this.emit();
  }

  private applyState(frame: StateFrame): void {
    this.label = frame.label;
    this.led = frame.led;
    this.recording = frame.recording;
    if (frame.event) {
      this.lastEvent = frame.event;
      this.addLog('event', `label ${frame.event.label} at ${frame.event.t_ms} ms`);
    }
  }

  private applySensor(msg: SensorMessage): void {
    this.trace.push({ t_ms: msg.t_ms, v: msg.v, label: this.label });
  }

  addLog(kind: LogEntry['kind'], text: string): void {
    this.log.push({ at: Date.now(), text, kind });
    if (this.log.length > MAX_LOG_ENTRIES) {
      this.log.splice(0, this.log.length - MAX_LOG_ENTRIES);
    }
  }
}
