/**
 * Rolling 9-channel trace with the current label as a coloured background
 * band. Pure scaling helpers are separated from canvas drawing so they can
 * be tested headless.
 */

import type { SensorPoint } from './session.js';

export const LABEL_COLOURS: Record<number, string> = {
  [-1]: '#e0e0e0',
  0: '#ffd9d9',
  1: '#d9f2d9',
  2: '#d9e4ff',
};

const CHANNEL_COLOURS = [
  '#c0392b', '#e67e22', '#f1c40f', // accel x y z
  '#27ae60', '#16a085', '#2980b9', // gyro x y z
  '#8e44ad', '#7f8c8d', '#2c3e50', // mag x y z
];

export interface ChannelScale {
  lo: number;
  hi: number;
}

/** Per-channel min/max over the visible window, padded so flat lines show. */
export function channelScales(points: SensorPoint[]): ChannelScale[] {
  const scales: ChannelScale[] = [];
  for (let c = 0; c < 9; c++) {
    let lo = Infinity;
    let hi = -Infinity;
    for (const p of points) {
      const v = p.v[c];
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
    if (!points.length) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }
    scales.push({ lo, hi });
  }
  return scales;
}

/** Contiguous same-label runs as [startIdx, endIdx) index pairs. */
export function labelRuns(points: SensorPoint[]): { from: number; to: number; label: number }[] {
  const runs: { from: number; to: number; label: number }[] = [];
  let from = 0;
  for (let i = 1; i <= points.length; i++) {
    if (i === points.length || points[i].label !== points[from].label) {
      runs.push({ from, to: i, label: points[from].label });
      from = i;
    }
  }
  return runs;
}

export function drawTrace(canvas: HTMLCanvasElement, points: SensorPoint[]): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (!points.length) {
    ctx.strokeStyle = '#bbb';
    ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
    return;
  }
  const n = points.length;
  const x = (i: number) => (n === 1 ? width : (i / (n - 1)) * width);

  for (const run of labelRuns(points)) {
    ctx.fillStyle = LABEL_COLOURS[run.label] ?? LABEL_COLOURS[-1];
    const x0 = x(run.from);
    const x1 = x(Math.max(run.to - 1, run.from));
    ctx.fillRect(x0, 0, Math.max(x1 - x0, 1), height);
  }

  const scales = channelScales(points);
  const bandH = height / 9;
  for (let c = 0; c < 9; c++) {
    const { lo, hi } = scales[c];
    ctx.strokeStyle = CHANNEL_COLOURS[c];
    ctx.lineWidth = 1;
    ctx.beginPath();
    for (let i = 0; i < n; i++) {
      const norm = (points[i].v[c] - lo) / (hi - lo);
      const y = (c + 1) * bandH - norm * bandH;
      if (i === 0) ctx.moveTo(x(i), y);
      else ctx.lineTo(x(i), y);
    }
    ctx.stroke();
  }
}
