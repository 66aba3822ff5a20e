// Per-garment drawing layers. Each garment lives on its own layer; drawing
// and undo touch only the active layer's stroke list.

import { bitmapsEqual, blankBitmap, GrayBitmap, renderStrokes } from './raster.js';
import { BrushSettings, DEFAULT_BRUSH, Stroke } from './types.js';

export class CanvasLayer {
  readonly category: string;
  visible = true;
  brush: BrushSettings;
  private strokes: Stroke[] = [];
  private bitmap: GrayBitmap;
  private dirty = false;

  constructor(category: string, brush: BrushSettings = DEFAULT_BRUSH) {
    this.category = category;
    this.brush = { ...brush };
    this.bitmap = blankBitmap();
  }

  addStroke(stroke: Stroke): void {
    this.strokes.push(stroke);
    this.dirty = true;
  }

  /** Remove the most recent stroke; no-op on an empty layer. */
  undo(): boolean {
    if (this.strokes.length === 0) return false;
    this.strokes.pop();
    this.dirty = true;
    return true;
  }

  strokeLog(): readonly Stroke[] {
    return this.strokes;
  }

  strokeCount(): number {
    return this.strokes.length;
  }

  isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  /** Bitmap is always re-derivable from the stroke log (pure render). */
  render(): GrayBitmap {
    if (this.dirty) {
      this.bitmap = renderStrokes(this.strokes, this.brush);
      this.dirty = false;
    }
    return this.bitmap;
  }

  equalsBitmap(other: GrayBitmap): boolean {
    return bitmapsEqual(this.render(), other);
  }
}
