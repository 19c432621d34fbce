/**
 * WebSocket client for the labelling server. One JSON object per message
 * line; incoming frames are parsed and pushed into the session store.
 */

import { decodeServerLine, encode, MonotoneClock } from './protocol.js';
import type { ClientMessage, MechanismId, ServerMessage } from './protocol.js';
import type { SessionState } from './session.js';

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: any) => void): void;
};

type WebSocketCtor = new (url: string) => WebSocketLike;

export interface ClientOptions {
  /** injectable for tests and non-browser runtimes */
  webSocketImpl?: WebSocketCtor;
  clock?: MonotoneClock;
  onMessage?: (msg: ServerMessage) => void;
}

export class LabellingClient {
  private ws: WebSocketLike | null = null;
  readonly clock: MonotoneClock;
  private readonly impl: WebSocketCtor;
  private readonly onMessage?: (msg: ServerMessage) => void;

  constructor(
    private readonly session: SessionState,
    options: ClientOptions = {},
  ) {
    this.impl = options.webSocketImpl ?? (globalThis.WebSocket as unknown as WebSocketCtor);
    this.clock = options.clock ?? new MonotoneClock();
    this.onMessage = options.onMessage;
  }

  connect(url: string): Promise<void> {
    this.session.setStatus('connecting');
    return new Promise((resolve, reject) => {
      const ws = new this.impl(url);
      ws.addEventListener('open', () => {
        this.ws = ws;
        this.session.setStatus('connected');
        resolve();
      });
      ws.addEventListener('message', (ev: { data: unknown }) => {
        for (const line of String(ev.data).split('\n')) {
          const msg = decodeServerLine(line);
          if (msg) {
            this.session.apply(msg);
            this.onMessage?.(msg);
          }
        }
      });
      ws.addEventListener('close', () => {
        this.ws = null;
        this.session.setStatus('disconnected');
      });
      ws.addEventListener('error', (err: unknown) => {
        this.session.setStatus('disconnected');
        reject(err);
      });
    });
  }

  get connected(): boolean {
    return this.ws !== null;
  }

  send(msg: ClientMessage): void {
    if (!this.ws) throw new Error('not connected');
    this.ws.send(encode(msg));
  }

  start(mechanism: MechanismId, config?: Record<string, unknown>): void {
    this.session.setMechanism(mechanism);
    this.send({
      type: 'control',
      action: 'start',
      mechanism,
      t_ms: this.clock.next(),
      ...(config ? { config } : {}),
    });
  }

  stop(): void {
    this.send({ type: 'control', action: 'stop', t_ms: this.clock.next() });
  }

  close(): void {
    this.ws?.close();
  }
}
