/**
 * Golden-vector parity harness: replay a stored input script against a live
 * server and check the emitted label events match the expectations exactly.
 * The vectors are the same line-delimited JSON files the backend test suite
 * replays in-process, so passing here proves the wire path preserves the
 * mechanism semantics bit for bit.
 */

export interface GoldenLine {
  type: 'meta' | 'input' | 'control' | 'flush' | 'expect';
  [key: string]: unknown;
}

export interface ReplayResult {
  ok: boolean;
  sent: number;
  expected: [number, number][];
  got: [number, number][];
  warning?: string;
  error?: string;
}

export function parseGoldenVector(text: string): GoldenLine[] {
  return text
    .split('\n')
    .map((l) => l.trim())
    .filter((l) => l.length > 0)
    .map((l) => JSON.parse(l) as GoldenLine);
}

type WebSocketCtor = new (url: string) => {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
};

/** Strict request/reply socket driver used only by the replay harness. */
class ReplaySocket {
  private queue: string[] = [];
  private waiter: ((line: string) => void) | null = null;
  private ws: InstanceType<WebSocketCtor> | null = null;

  constructor(private readonly impl: WebSocketCtor) {}

  connect(url: string): Promise<void> {
    return new Promise((resolve, reject) => {
      const ws = new this.impl(url);
      ws.addEventListener('open', () => {
        this.ws = ws;
        resolve();
      });
      ws.addEventListener('error', (e: unknown) => reject(e));
      ws.addEventListener('message', (ev: { data: unknown }) => {
        for (const line of String(ev.data).split('\n')) {
          if (!line.trim()) continue;
          if (this.waiter) {
            const w = this.waiter;
            this.waiter = null;
            w(line);
          } else {
            this.queue.push(line);
          }
        }
      });
    });
  }

  request(msg: object, timeoutMs = 5000): Promise<Record<string, unknown>> {
    if (!this.ws) throw new Error('not connected');
    this.ws.send(JSON.stringify(msg));
    const next = this.queue.shift();
    if (next !== undefined) return Promise.resolve(JSON.parse(next));
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('reply timeout')), timeoutMs);
      this.waiter = (line) => {
        clearTimeout(timer);
        resolve(JSON.parse(line));
      };
    });
  }

  close(): void {
    this.ws?.close();
  }
}

export async function replayGoldenVector(
  text: string,
  url: string,
  impl?: WebSocketCtor,
): Promise<ReplayResult> {
  const lines = parseGoldenVector(text);
  if (lines.length === 0) {
    return { ok: true, sent: 0, expected: [], got: [], warning: 'empty vector file' };
  }
  const meta = lines[0];
  if (meta.type !== 'meta') {
    return { ok: false, sent: 0, expected: [], got: [], error: 'missing meta line' };
  }
  const expected: [number, number][] = lines
    .filter((l) => l.type === 'expect')
    .map((l) => [l.t_ms as number, l.label as number]);
  if (lines.length === 1) {
    return { ok: true, sent: 0, expected, got: [], warning: 'vector has no steps' };
  }

  const ctor = impl ?? (globalThis.WebSocket as unknown as WebSocketCtor);
  const socket = new ReplaySocket(ctor);
  await socket.connect(url);
  const got: [number, number][] = [];
  let sent = 0;
  const collect = (reply: Record<string, unknown>) => {
    if (reply.type === 'state' && reply.event) {
      const ev = reply.event as { t_ms: number; label: number };
      got.push([ev.t_ms, ev.label]);
    }
  };
  try {
    collect(
      await socket.request({
        type: 'control',
        action: 'start',
        mechanism: meta.mechanism,
        config: meta.config ?? {},
        t_ms: 0,
      }),
    );
    sent += 1;
    for (const line of lines.slice(1)) {
      if (line.type === 'input') {
        collect(
          await socket.request({
            type: 'input',
            t_ms: line.t_ms,
            kind: line.kind,
            value: line.value,
          }),
        );
        sent += 1;
      } else if (line.type === 'control') {
        collect(await socket.request({ type: 'control', action: line.action, t_ms: line.t_ms }));
        sent += 1;
      } else if (line.type === 'flush') {
        collect(await socket.request({ type: 'control', action: 'stop', t_ms: line.t_ms }));
        sent += 1;
      }
    }
  } catch (e) {
    socket.close();
    return { ok: false, sent, expected, got, error: String(e) };
  }
  socket.close();
  const ok =
    got.length === expected.length &&
    got.every(([t, l], i) => t === expected[i][0] && l === expected[i][1]);
  return { ok, sent, expected, got };
}
