import { readFileSync } from 'node:fs';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { isBlank } from '../src/raster.js';
import { importSession, StudioSession } from '../src/session.js';
import { Stroke } from '../src/types.js';
import { validate } from './schema.js';

const here = dirname(fileURLToPath(import.meta.url));
const sessionSchema = JSON.parse(
  readFileSync(join(here, 'fixtures/annotation_session.schema.json'), 'utf-8'));
const generationSchema = JSON.parse(
  readFileSync(join(here, 'fixtures/generation_request.schema.json'), 'utf-8'));

function stroke(points: number[][], pointer = 'mouse'): Stroke {
  return {
    pointer_type: pointer,
    started_at: points[0][2],
    ended_at: points[points.length - 1][2],
    points,
  };
}

function drawnSession(pointer = 'mouse'): StudioSession {
  const session = new StudioSession(0);
  session.referenceImageId = 'ref42';
  const top = session.addLayer('top');
  const pants = session.addLayer('pants');
  session.recordStroke(top, stroke([[50, 50, 1], [200, 60, 2]], pointer));
  session.recordStroke(pants, stroke([[60, 300, 3], [220, 320, 4]], pointer));
  session.setText(top, 'a red striped top');
  session.setText(pants, 'a blue pants');
  return session;
}

describe('layer isolation', () => {
  it('drawing on one layer never mutates another', () => {
    const session = new StudioSession(0);
    const a = session.addLayer('top');
    const b = session.addLayer('pants');
    const bBefore = Uint8ClampedArray.from(b.render());
    session.recordStroke(a, stroke([[10, 10, 1], [400, 400, 2]]));
    expect(isBlank(a.render())).toBe(false);
    expect(b.render()).toEqual(bBefore);
    expect(isBlank(b.render())).toBe(true);
  });

  it('undo removes only the last stroke of the target layer', () => {
    const session = new StudioSession(0);
    const a = session.addLayer('top');
    session.recordStroke(a, stroke([[10, 10, 1], [50, 10, 2]]));
    const afterOne = Uint8ClampedArray.from(a.render());
    session.recordStroke(a, stroke([[10, 40, 3], [50, 40, 4]]));
    expect(a.undo()).toBe(true);
    expect(a.render()).toEqual(afterOne);
    expect(a.undo()).toBe(true);
    expect(isBlank(a.render())).toBe(true);
    expect(a.undo()).toBe(false);
  });
});

describe('device classification', () => {
  it('pen pointer type maps to stylus', () => {
    expect(drawnSession('pen').deviceKind()).toBe('stylus');
  });

  it('mouse pointer maps to mouse', () => {
    expect(drawnSession('mouse').deviceKind()).toBe('mouse');
  });

  it('is fixed by the first stroke for the whole session', () => {
    const session = new StudioSession(0);
    const layer = session.addLayer('top');
    session.recordStroke(layer, stroke([[1, 1, 1], [2, 2, 2]], 'pen'));
    session.recordStroke(layer, stroke([[3, 3, 3], [4, 4, 4]], 'mouse'));
    expect(session.deviceKind()).toBe('stylus');
  });
});

describe('session export', () => {
  it('blocks exporting an all-empty session', () => {
    const session = new StudioSession(0);
    session.addLayer('top');
    expect(() => session.exportSession()).toThrow(/empty/);
  });

  it('two-layer session exports two images plus device and timestamps', () => {
    const payload = drawnSession('pen').exportSession();
    expect(payload.layers).toHaveLength(2);
    expect(payload.device).toBe('stylus');
    expect(payload.started_at).toBe(0);
    expect(payload.ended_at).toBeGreaterThanOrEqual(4);
    expect(payload.layers[0].sketch.length).toBeGreaterThan(100);
  });

  it('validates against the service annotation schema', () => {
    const payload = drawnSession().exportSession();
    expect(validate(payload, sessionSchema)).toEqual([]);
  });

  it('export -> import -> re-export is byte-stable', () => {
    const payload = drawnSession().exportSession();
    const reimported = importSession(payload);
    const again = reimported.exportSession();
    expect(JSON.stringify(again)).toBe(JSON.stringify(payload));
  });

  it('generation payload validates against the service schema', () => {
    const payload = drawnSession().toGenerationRequest(0.8, 7, 20);
    expect(validate(payload, generationSchema)).toEqual([]);
    expect(payload.pairs.map((p) => p.text))
      .toEqual(['a red striped top', 'a blue pants']);
  });

  it('empty layers are excluded from generation pairs', () => {
    const session = drawnSession();
    session.addLayer('hat'); // never drawn on
    expect(session.toGenerationRequest(1, 0).pairs).toHaveLength(2);
  });
});
