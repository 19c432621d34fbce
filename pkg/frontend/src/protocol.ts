/**
 * Wire protocol shared with the labelling server: line-delimited JSON over a
 * WebSocket. The server owns all mechanism semantics; the client only sends
 * raw interactions and renders the echoed state.
 */

export type MechanismId =
  | 'two_button_adjacent'
  | 'two_button_opposite'
  | 'three_button'
  | 'touch'
  | 'slider'
  | 'app';

export const MECHANISMS: MechanismId[] = [
  'two_button_adjacent',
  'two_button_opposite',
  'three_button',
  'touch',
  'slider',
  'app',
];

export type InputKind = 'button_down' | 'button_up' | 'force' | 'slider' | 'tap';

export type LedColour = 'green' | 'yellow' | 'red' | 'off';

export const LABEL_NAMES = ['Downstairs', 'Walking', 'Upstairs'] as const;

export interface ControlMessage {
  type: 'control';
  action: 'start' | 'stop';
  mechanism?: MechanismId;
  t_ms?: number;
  config?: Record<string, unknown>;
}

export interface InputMessage {
  type: 'input';
  t_ms: number;
  kind: InputKind;
  value: number | string;
}

export interface SensorMessage {
  type: 'sensor';
  t_ms: number;
  v: number[];
}

export type ClientMessage = ControlMessage | InputMessage | SensorMessage;

export interface StateFrame {
  type: 'state';
  label: number;
  led: LedColour;
  recording: boolean;
  event?: { t_ms: number; label: number };
}

export interface ErrorFrame {
  type: 'error';
  msg: string;
}

export type ServerMessage = StateFrame | ErrorFrame | SensorMessage;

export function encode(msg: ClientMessage): string {
  return JSON.stringify(msg);
}

/** Parse one line from the server; null for blank or unusable lines. */
export function decodeServerLine(line: string): ServerMessage | null {
  const trimmed = line.trim();
  if (!trimmed) return null;
  let parsed: unknown;
  try {
    parsed = JSON.parse(trimmed);
  } catch {
    return null;
  }
  if (typeof parsed !== 'object' || parsed === null) return null;
  const msg = parsed as Record<string, unknown>;
  if (msg.type === 'state' && typeof msg.label === 'number') {
    return msg as unknown as StateFrame;
  }
  if (msg.type === 'error' && typeof msg.msg === 'string') {
    return msg as unknown as ErrorFrame;
  }
  if (msg.type === 'sensor' && Array.isArray(msg.v) && msg.v.length === 9) {
    return msg as unknown as SensorMessage;
  }
  return null;
}

/** Monotone client-relative millisecond clock for message timestamps. */
export class MonotoneClock {
  private last = -1;
  constructor(private readonly now: () => number = () => performance.now()) {}

  next(): number {
    const t = Math.round(this.now());
    this.last = t > this.last ? t : this.last;
    return this.last;
  }
}
