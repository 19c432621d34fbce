import { describe, expect, it } from 'vitest';

import { channelScales, labelRuns } from '../src/chart.js';
import type { SensorPoint } from '../src/session.js';

function point(t: number, label: number, fill = 0): SensorPoint {
  return { t_ms: t, label, v: new Array(9).fill(fill) };
}

describe('channelScales', () => {
  it('gives unit defaults on an empty window', () => {
    const scales = channelScales([]);
    expect(scales).toHaveLength(9);
    expect(scales[0]).toEqual({ lo: 0, hi: 1 });
  });

  it('pads flat channels so they remain visible', () => {
    const scales = channelScales([point(0, -1, 5), point(20, -1, 5)]);
    expect(scales[3].hi).toBeGreaterThan(scales[3].lo);
  });

  it('tracks per-channel extrema', () => {
    const a = point(0, -1);
    const b = point(20, -1);
    a.v[2] = -3;
    b.v[2] = 7;
    const scales = channelScales([a, b]);
    expect(scales[2]).toEqual({ lo: -3, hi: 7 });
  });
});

describe('labelRuns', () => {
  it('splits the trace into contiguous label runs', () => {
    const points = [point(0, -1), point(1, -1), point(2, 1), point(3, 1), point(4, 2)];
    expect(labelRuns(points)).toEqual([
      { from: 0, to: 2, label: -1 },
      { from: 2, to: 4, label: 1 },
      { from: 4, to: 5, label: 2 },
    ]);
  });

  it('empty trace has no runs', () => {
    expect(labelRuns([])).toEqual([]);
  });
});
