import { describe, expect, it } from 'vitest';

import { bitmapsEqual, blankBitmap, isBlank, renderStrokes, WHITE, BLACK } from '../src/raster.js';
import { CANVAS_SIZE, Stroke } from '../src/types.js';

function stroke(points: number[][], pointer = 'mouse'): Stroke {
  return {
    pointer_type: pointer,
    started_at: points[0]?.[2] ?? 0,
    ended_at: points[points.length - 1]?.[2] ?? 0,
    points,
  };
}

describe('stroke rasterizer', () => {
  it('renders a blank canvas for an empty stroke log', () => {
    expect(isBlank(renderStrokes([], { size: 4 }))).toBe(true);
  });

  it('paints black pixels along a stroke', () => {
    const bitmap = renderStrokes([stroke([[10, 10, 0], [40, 10, 1]])], { size: 4 });
    expect(bitmap[10 * CANVAS_SIZE + 10]).toBe(BLACK);
    expect(bitmap[10 * CANVAS_SIZE + 25]).toBe(BLACK);
    expect(bitmap[10 * CANVAS_SIZE + 40]).toBe(BLACK);
    expect(bitmap[200 * CANVAS_SIZE + 200]).toBe(WHITE);
  });

  it('replaying a recorded stroke log reproduces the bitmap pixel-exactly', () => {
    const log: Stroke[] = [];
    let t = 0;
    for (let s = 0; s < 12; s++) {
      const points: number[][] = [];
      let x = (s * 37) % CANVAS_SIZE;
      let y = (s * 91) % CANVAS_SIZE;
      for (let i = 0; i < 40; i++) {
        x = (x + ((s + 3) % 7) - 3 + CANVAS_SIZE) % CANVAS_SIZE;
        y = (y + ((s + 5) % 5) - 2 + CANVAS_SIZE) % CANVAS_SIZE;
        points.push([x, y, t++, (i % 10) / 10]);
      }
      log.push(stroke(points, s % 2 ? 'pen' : 'mouse'));
    }
    const first = renderStrokes(log, { size: 6 });
    const replayed = renderStrokes(JSON.parse(JSON.stringify(log)), { size: 6 });
    expect(bitmapsEqual(first, replayed)).toBe(true);
  });

  it('stays inside canvas bounds for edge strokes', () => {
    const bitmap = renderStrokes(
      [stroke([[0, 0, 0], [CANVAS_SIZE - 1, CANVAS_SIZE - 1, 1]])], { size: 12 });
    expect(bitmap.length).toBe(CANVAS_SIZE * CANVAS_SIZE);
    expect(bitmap[0]).toBe(BLACK);
  });

  it('brush size changes the footprint', () => {
    const thin = renderStrokes([stroke([[100, 100, 0]])], { size: 2 });
    const thick = renderStrokes([stroke([[100, 100, 0]])], { size: 12 });
    const count = (b: Uint8ClampedArray) => b.reduce((n, v) => n + (v === BLACK ? 1 : 0), 0);
    expect(count(thick)).toBeGreaterThan(count(thin));
  });

  it('blank bitmap is all white', () => {
    const bitmap = blankBitmap();
    expect(bitmap.every((v) => v === WHITE)).toBe(true);
  });
});
