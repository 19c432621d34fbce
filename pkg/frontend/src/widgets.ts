/**
 * Mechanism widgets. Each user interaction emits exactly one protocol input
 * message; the pure InputEmitter is the single place messages are built, so
 * widgets stay free of label logic (labels are server echoes only).
 */

import type { InputKind, MechanismId } from './protocol.js';
import { MonotoneClock } from './protocol.js';
import type { InputMessage } from './protocol.js';

export const TOUCH_RAMP_MS = 1500;

export class InputEmitter {
  constructor(
    private readonly send: (msg: InputMessage) => void,
    readonly clock: MonotoneClock = new MonotoneClock(),
  ) {}

  private emit(kind: InputKind, value: number | string): void {
    this.send({ type: 'input', t_ms: this.clock.next(), kind, value });
  }

  buttonDown(id: string): void {
    this.emit('button_down', id);
  }

  buttonUp(id: string): void {
    this.emit('button_up', id);
  }

  tap(label: number): void {
    this.emit('tap', label);
  }

  slider(raw: number): void {
    this.emit('slider', clampRaw(raw));
  }

  force(raw: number): void {
    this.emit('force', clampRaw(raw));
  }
}

export function clampRaw(raw: number): number {
  return Math.max(0, Math.min(1023, Math.round(raw)));
}

/** Hold duration to force reading, linear over the configured ramp. */
export function holdForce(heldMs: number, rampMs: number = TOUCH_RAMP_MS): number {
  return clampRaw((heldMs / rampMs) * 1023);
}

export interface WidgetHandle {
  element: HTMLElement;
  dispose(): void;
}

const BUTTON_STYLE =
  'padding:18px 26px;margin:6px;font-size:15px;border-radius:8px;cursor:pointer;';

function button(label: string): HTMLButtonElement {
  const b = document.createElement('button');
  b.textContent = label;
  b.setAttribute('style', BUTTON_STYLE);
  return b;
}

function threeButtonWidget(emitter: InputEmitter, app: boolean): WidgetHandle {
  const root = document.createElement('div');
  const defs: [string, string | number][] = app
    ? [
        ['Downstairs', 0],
        ['Walking', 1],
        ['Upstairs', 2],
      ]
    : [
        ['Downstairs', 'down'],
        ['Walking', 'walk'],
        ['Upstairs', 'up'],
      ];
  for (const [text, value] of defs) {
    const b = button(text);
    b.addEventListener('click', () => {
      if (app) emitter.tap(value as number);
      else {
        emitter.buttonDown(value as string);
      }
    });
    if (!app) {
      // physical buttons release too; clicks map to a down, mouseup to the up
      b.addEventListener('mouseup', () => emitter.buttonUp(value as string));
    }
    root.appendChild(b);
  }
  return { element: root, dispose: () => undefined };
}

const TWO_BUTTON_KEYS: Record<string, string> = { a: 'a', l: 'b' };

function twoButtonWidget(emitter: InputEmitter): WidgetHandle {
  const root = document.createElement('div');
  const hint = document.createElement('p');
  hint.textContent =
    'A alone = Upstairs, B alone = Downstairs, both together = Walking. ' +
    'Keys: "a" and "l" (hold both for Walking).';
  root.appendChild(hint);
  for (const id of ['a', 'b']) {
    const b = button(`Button ${id.toUpperCase()}`);
    b.addEventListener('pointerdown', () => emitter.buttonDown(id));
    b.addEventListener('pointerup', () => emitter.buttonUp(id));
    root.appendChild(b);
  }
  // keyboard path makes genuinely simultaneous presses possible
  const down = (ev: KeyboardEvent) => {
    const id = TWO_BUTTON_KEYS[ev.key];
    if (id && !ev.repeat) emitter.buttonDown(id);
  };
  const up = (ev: KeyboardEvent) => {
    const id = TWO_BUTTON_KEYS[ev.key];
    if (id) emitter.buttonUp(id);
  };
  window.addEventListener('keydown', down);
  window.addEventListener('keyup', up);
  return {
    element: root,
    dispose: () => {
      window.removeEventListener('keydown', down);
      window.removeEventListener('keyup', up);
    },
  };
}

function sliderWidget(emitter: InputEmitter): WidgetHandle {
  const root = document.createElement('div');
  const track = document.createElement('input');
  track.type = 'range';
  track.min = '0';
  track.max = '1023';
  track.value = '0';
  track.style.width = '320px';
  track.addEventListener('input', () => emitter.slider(Number(track.value)));
  const legend = document.createElement('p');
  legend.textContent = 'left = Downstairs, middle = Walking, right = Upstairs';
  root.appendChild(track);
  root.appendChild(legend);
  return { element: root, dispose: () => undefined };
}

function touchWidget(emitter: InputEmitter, rampMs: number): WidgetHandle {
  const root = document.createElement('div');
  const pad = button('press and hold');
  pad.style.minWidth = '180px';
  const hint = document.createElement('p');
  hint.textContent = 'hold longer for higher force: green / yellow / red';
  root.appendChild(pad);
  root.appendChild(hint);
  let timer: ReturnType<typeof setInterval> | null = null;
  let heldFrom = 0;
  const release = () => {
    if (timer !== null) {
      clearInterval(timer);
      timer = null;
      emitter.force(0);
    }
  };
  pad.addEventListener('pointerdown', () => {
    heldFrom = Date.now();
    emitter.force(holdForce(0, rampMs));
    timer = setInterval(() => emitter.force(holdForce(Date.now() - heldFrom, rampMs)), 50);
  });
  pad.addEventListener('pointerup', release);
  pad.addEventListener('pointerleave', release);
  return { element: root, dispose: release };
}

export function renderMechanism(
  mechanism: MechanismId,
  emitter: InputEmitter,
  rampMs: number = TOUCH_RAMP_MS,
): WidgetHandle {
  switch (mechanism) {
    case 'three_button':
      return threeButtonWidget(emitter, false);
    case 'app':
      return threeButtonWidget(emitter, true);
    case 'two_button_adjacent':
    case 'two_button_opposite':
      return twoButtonWidget(emitter);
    case 'slider':
      return sliderWidget(emitter);
    case 'touch':
      return touchWidget(emitter, rampMs);
  }
}
