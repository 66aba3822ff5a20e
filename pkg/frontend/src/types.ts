// Wire types mirroring the service's /v1 schemas.

export const CANVAS_SIZE = 512;

export type Device = 'mouse' | 'stylus';
export type SessionStatus = 'draft' | 'completed';
export type Variant = 'lots' | 'concat' | 'attn' | 'pool';

export interface StrokePoint {
  x: number;
  y: number;
  t: number; // seconds since session start
  pressure: number;
}

export interface Stroke {
  pointer_type: string;
  started_at: number;
  ended_at: number;
  /** rows of [x, y, t, pressure] */
  points: number[][];
}

export interface AnnotationLayerPayload {
  garment_category: string;
  sketch: string; // base64 PNG, 512x512
  stroke_log: Stroke[];
}

export interface AnnotationSessionPayload {
  reference_image_id: string;
  layers: AnnotationLayerPayload[];
  device: Device;
  started_at: number;
  ended_at: number;
  status: SessionStatus;
}

export interface SketchPairPayload {
  sketch: string;
  text: string;
  layer_id: string;
}

export interface GenerationRequestPayload {
  pairs: SketchPairPayload[];
  global_context?: string;
  alpha: number;
  seed: number;
  steps: number;
  variant: Variant;
}

export interface GenerationResponsePayload {
  request_id: string;
  image: string;
  timings: Record<string, number>;
}

export interface TaskRegion {
  category: string;
  bbox: [number, number, number, number];
}

export interface TaskPayload {
  image_id: string;
  image: string;
  regions: TaskRegion[];
}

export interface BrushSettings {
  /** brush diameter in pixels; monochrome black round brush */
  size: number;
}

export const DEFAULT_BRUSH: BrushSettings = { size: 4 };
export const MIN_BRUSH = 2;
export const MAX_BRUSH = 12;
