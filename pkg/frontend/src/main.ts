/**
 * App entry: connect to the labelling server, render the selected mechanism
 * widget, the rolling trace and the event log, all driven by server echoes.
 */

import { LabellingClient } from './client.js';
import { drawTrace } from './chart.js';
import { LABEL_NAMES, MECHANISMS } from './protocol.js';
import type { MechanismId } from './protocol.js';
import { SessionState } from './session.js';
import { InputEmitter, renderMechanism } from './widgets.js';
import type { WidgetHandle } from './widgets.js';

const session = new SessionState();
const client = new LabellingClient(session);

const el = {
  status: document.getElementById('status') as HTMLElement,
  label: document.getElementById('label') as HTMLElement,
  led: document.getElementById('led') as HTMLElement,
  mechanism: document.getElementById('mechanism') as HTMLSelectElement,
  url: document.getElementById('url') as HTMLInputElement,
  connect: document.getElementById('connect') as HTMLButtonElement,
  start: document.getElementById('start') as HTMLButtonElement,
  stop: document.getElementById('stop') as HTMLButtonElement,
  widget: document.getElementById('widget') as HTMLElement,
  chart: document.getElementById('chart') as HTMLCanvasElement,
  log: document.getElementById('log') as HTMLElement,
};

for (const m of MECHANISMS) {
  const opt = document.createElement('option');
  opt.value = m;
  opt.textContent = m;
  el.mechanism.appendChild(opt);
}

let widget: WidgetHandle | null = null;

function mountWidget(): void {
  widget?.dispose();
  el.widget.innerHTML = '';
  if (session.status !== 'connected') {
    el.widget.textContent = 'disconnected: connect to the server to label';
    return;
  }
  const emitter = new InputEmitter((msg) => client.send(msg), client.clock);
  widget = renderMechanism(el.mechanism.value as MechanismId, emitter);
  el.widget.appendChild(widget.element);
}

function render(): void {
  el.status.textContent = `${session.status}${session.recording ? ' · recording' : ''}`;
  el.label.textContent =
    session.label >= 0 ? `${session.label} (${LABEL_NAMES[session.label]})` : 'none';
  el.led.style.background = session.led === 'off' ? '#ccc' : session.led;
  el.log.textContent = session.log
    .slice(-12)
    .map((e) => `[${e.kind}] ${e.text}`)
    .join('\n');
}

session.subscribe(render);

el.connect.addEventListener('click', async () => {
  try {
    await client.connect(el.url.value);
  } catch {
    session.addLog('error', 'connection failed');
  }
  mountWidget();
});

el.start.addEventListener('click', () => {
  client.start(el.mechanism.value as MechanismId);
  mountWidget();
});
el.stop.addEventListener('click', () => client.stop());
el.mechanism.addEventListener('change', mountWidget);

function frame(): void {
  drawTrace(el.chart, session.trace.toArray());
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
render();
mountWidget();
