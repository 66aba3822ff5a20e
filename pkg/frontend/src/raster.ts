// Pure stroke rasterizer: the bitmap is a function of (strokes, brush) only,
// so replaying a recorded stroke log reproduces pixels exactly.

import { BrushSettings, CANVAS_SIZE, Stroke } from './types.js';

export const WHITE = 255;
export const BLACK = 0;

export type GrayBitmap = Uint8ClampedArray; // CANVAS_SIZE * CANVAS_SIZE, row-major

export function blankBitmap(): GrayBitmap {
  return new Uint8ClampedArray(CANVAS_SIZE * CANVAS_SIZE).fill(WHITE);
}

function stampDot(bitmap: GrayBitmap, cx: number, cy: number, radius: number): void {
  const r2 = radius * radius;
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(CANVAS_SIZE - 1, Math.ceil(cy + radius));
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(CANVAS_SIZE - 1, Math.ceil(cx + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) {
        bitmap[y * CANVAS_SIZE + x] = BLACK;
      }
    }
  }
}

/** Stamp round dots along each stroke segment, spaced at most half a radius. */
export function drawStroke(bitmap: GrayBitmap, stroke: Stroke, brush: BrushSettings): void {
  const radius = brush.size / 2;
  const pts = stroke.points;
  if (pts.length === 0) return;
  stampDot(bitmap, pts[0][0], pts[0][1], radius);
  for (let i = 1; i < pts.length; i++) {
    const [ax, ay] = pts[i - 1];
    const [bx, by] = pts[i];
    const dist = Math.hypot(bx - ax, by - ay);
    const steps = Math.max(1, Math.ceil(dist / Math.max(radius / 2, 0.5)));
    for (let s = 1; s <= steps; s++) {
      const f = s / steps;
      stampDot(bitmap, ax + (bx - ax) * f, ay + (by - ay) * f, radius);
    }
  }
}

/** Render a full stroke list onto a fresh white canvas. */
export function renderStrokes(strokes: readonly Stroke[], brush: BrushSettings): GrayBitmap {
  const bitmap = blankBitmap();
  for (const stroke of strokes) {
    drawStroke(bitmap, stroke, brush);
  }
  return bitmap;
}

export function bitmapsEqual(a: GrayBitmap, b: GrayBitmap): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}

export function isBlank(bitmap: GrayBitmap): boolean {
  for (let i = 0; i < bitmap.length; i++) {
    if (bitmap[i] !== WHITE) return false;
  }
  return true;
}

/** Clamp a pointer position into canvas bounds. */
export function clampToCanvas(x: number, y: number): [number, number] {
  return [
    Math.min(Math.max(x, 0), CANVAS_SIZE - 1),
    Math.min(Math.max(y, 0), CANVAS_SIZE - 1),
  ];
}
