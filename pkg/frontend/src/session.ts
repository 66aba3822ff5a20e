// Studio session state: layers, per-layer descriptions, device detection,
// timestamps, and export to the service's annotation payload.

import { CanvasLayer } from './layers.js';
import { encodeGrayPngBase64 } from './png.js';
import { CANVAS_SIZE, AnnotationSessionPayload, Device, GenerationRequestPayload,
         SessionStatus, Stroke, Variant } from './types.js';

export class StudioSession {
  referenceImageId = '';
  readonly layers: CanvasLayer[] = [];
  readonly texts: Map<CanvasLayer, string> = new Map();
  globalContext = '';
  startedAt: number;
  private device: Device | null = null;
  private lastStrokeEnd = 0;
  dirty = true; // a generation is pending when inputs changed since the last one

  constructor(startedAt = 0) {
    this.startedAt = startedAt;
  }

  addLayer(category: string): CanvasLayer {
    const layer = new CanvasLayer(category);
    this.layers.push(layer);
    this.texts.set(layer, '');
    return layer;
  }

  setText(layer: CanvasLayer, text: string): void {
    this.texts.set(layer, text);
    this.dirty = true;
  }

  /** Device classification is fixed by the first stroke's pointer type and
   * stays stable for the whole session. */
  recordStroke(layer: CanvasLayer, stroke: Stroke): void {
    if (this.device === null) {
      this.device = stroke.pointer_type === 'pen' ? 'stylus' : 'mouse';
    }
    if (stroke.ended_at < stroke.started_at) {
      throw new Error('stroke timestamps are not monotone');
    }
    this.lastStrokeEnd = Math.max(this.lastStrokeEnd, stroke.ended_at);
    layer.addStroke(stroke);
    this.dirty = true;
  }

  deviceKind(): Device {
    return this.device ?? 'mouse';
  }

  nonEmptyLayers(): CanvasLayer[] {
    return this.layers.filter((l) => !l.isEmpty());
  }

  /** One white-background 512x512 image per non-empty layer plus metadata. */
  exportSession(status: SessionStatus = 'completed'): AnnotationSessionPayload {
    const layers = this.nonEmptyLayers();
    if (layers.length === 0) {
      throw new Error('nothing to export: every layer is empty');
    }
    const endedAt = Math.max(this.lastStrokeEnd, this.startedAt);
    return {
      reference_image_id: this.referenceImageId,
      layers: layers.map((layer) => ({
        garment_category: layer.category,
        sketch: encodeGrayPngBase64(layer.render(), CANVAS_SIZE, CANVAS_SIZE),
        stroke_log: [...layer.strokeLog()],
      })),
      device: this.deviceKind(),
      started_at: this.startedAt,
      ended_at: endedAt,
      status,
    };
  }

  /** Localized pairs for POST /v1/generate; text defaults to the category. */
  toGenerationRequest(alpha: number, seed: number, steps = 50,
                      variant: Variant = 'lots'): GenerationRequestPayload {
    const layers = this.nonEmptyLayers();
    if (layers.length === 0) {
      throw new Error('nothing to generate from: every layer is empty');
    }
    const payload: GenerationRequestPayload = {
      pairs: layers.map((layer) => ({
        sketch: encodeGrayPngBase64(layer.render(), CANVAS_SIZE, CANVAS_SIZE),
        text: this.texts.get(layer) || `a ${layer.category}`,
        layer_id: layer.category,
      })),
      alpha,
      seed,
      steps,
      variant,
    };
    if (this.globalContext) {
      payload.global_context = this.globalContext;
    }
    return payload;
  }
}

/** Rebuild a session from an exported payload (offline round-trip). */
export function importSession(payload: AnnotationSessionPayload,
                              startedAt?: number): StudioSession {
  const session = new StudioSession(startedAt ?? payload.started_at);
  session.referenceImageId = payload.reference_image_id;
  for (const layerPayload of payload.layers) {
    const layer = session.addLayer(layerPayload.garment_category);
    for (const stroke of layerPayload.stroke_log) {
      session.recordStroke(layer, stroke);
    }
  }
  return session;
}
