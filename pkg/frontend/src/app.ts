// Browser wiring: canvas input, layer panel, reference task view, generation
// preview strip, annotation submission. All drawing state lives in
// StudioSession / CanvasLayer; this file only translates DOM events.

import { ApiClient, ServiceError } from './api.js';
import { CanvasLayer } from './layers.js';
import { clampToCanvas } from './raster.js';
import { StudioSession } from './session.js';
import { CANVAS_SIZE, MAX_BRUSH, MIN_BRUSH, Stroke, TaskPayload } from './types.js';

export class StudioApp {
  readonly session: StudioSession;
  private readonly api: ApiClient;
  private readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D;
  private activeLayer: CanvasLayer | null = null;
  private currentStroke: Stroke | null = null;
  task: TaskPayload | null = null;
  private generating = false;

  constructor(root: HTMLElement, api: ApiClient) {
    this.api = api;
    this.session = new StudioSession(performance.now() / 1000);
    root.innerHTML = `
      <div class="studio">
        <aside class="panel">
          <div id="reference"><em>no reference loaded</em></div>
          <button id="next-task">next reference</button>
          <ul id="layers"></ul>
          <input id="new-category" placeholder="garment category">
          <button id="add-layer">add layer</button>
          <button id="undo">undo stroke</button>
          <label>brush <input id="brush" type="range" min="${MIN_BRUSH}" max="${MAX_BRUSH}" value="4"></label>
          <input id="global-context" placeholder="global context description">
          <label>alpha <input id="alpha" type="range" min="0" max="1" step="0.05" value="1"></label>
          <label>seed <input id="seed" type="number" value="0"></label>
          <button id="generate">generate</button>
          <button id="export">submit annotation</button>
          <div id="status"></div>
        </aside>
        <canvas id="board" width="${CANVAS_SIZE}" height="${CANVAS_SIZE}"></canvas>
        <div id="previews" class="strip"></div>
      </div>`;
    this.canvas = root.querySelector('#board') as HTMLCanvasElement;
    this.ctx = this.canvas.getContext('2d') as CanvasRenderingContext2D;
    this.bind(root);
    this.redraw();
  }

  private bind(root: HTMLElement): void {
    const byId = <T extends HTMLElement>(id: string) => root.querySelector(`#${id}`) as T;
    byId<HTMLButtonElement>('add-layer').onclick = () => {
      const input = byId<HTMLInputElement>('new-category');
      if (!input.value.trim()) return;
      this.activeLayer = this.session.addLayer(input.value.trim());
      input.value = '';
      this.refreshLayerList(root);
    };
    byId<HTMLButtonElement>('undo').onclick = () => {
      if (this.activeLayer?.undo()) this.redraw();
    };
    byId<HTMLInputElement>('brush').oninput = (ev) => {
      const size = Number((ev.target as HTMLInputElement).value);
      for (const layer of this.session.layers) layer.brush.size = size;
    };
    byId<HTMLInputElement>('global-context').oninput = (ev) => {
      this.session.globalContext = (ev.target as HTMLInputElement).value;
      this.session.dirty = true;
      this.refreshGenerateButton(root);
    };
    byId<HTMLButtonElement>('next-task').onclick = () => void this.loadTask(root);
    byId<HTMLButtonElement>('generate').onclick = () => void this.generate(root);
    byId<HTMLButtonElement>('export').onclick = () => void this.submit(root);

    this.canvas.addEventListener('pointerdown', (ev) => this.strokeStart(ev));
    this.canvas.addEventListener('pointermove', (ev) => this.strokeMove(ev));
    this.canvas.addEventListener('pointerup', (ev) => this.strokeEnd(ev, root));
  }

  private now(): number {
    return performance.now() / 1000 - this.session.startedAt;
  }

  private strokeStart(ev: PointerEvent): void {
    if (!this.activeLayer) {
      this.setStatus('select or add a layer before drawing');
      return;
    }
    const [x, y] = clampToCanvas(ev.offsetX, ev.offsetY);
    const t = this.now();
    this.currentStroke = {
      pointer_type: ev.pointerType || 'mouse',
      started_at: t,
      ended_at: t,
      points: [[x, y, t, ev.pressure ?? 0]],
    };
  }

  private strokeMove(ev: PointerEvent): void {
    if (!this.currentStroke) return;
    const [x, y] = clampToCanvas(ev.offsetX, ev.offsetY);
    const t = this.now();
    this.currentStroke.points.push([x, y, t, ev.pressure ?? 0]);
    this.currentStroke.ended_at = t;
  }

  private strokeEnd(ev: PointerEvent, root: HTMLElement): void {
    if (!this.currentStroke || !this.activeLayer) return;
    this.strokeMove(ev);
    this.session.recordStroke(this.activeLayer, this.currentStroke);
    this.currentStroke = null;
    this.redraw();
    this.refreshGenerateButton(root);
  }

  private redraw(): void {
    const image = this.ctx.createImageData(CANVAS_SIZE, CANVAS_SIZE);
    const composite = new Uint8ClampedArray(CANVAS_SIZE * CANVAS_SIZE).fill(255);
    for (const layer of this.session.layers) {
      if (!layer.visible) continue;
      const bitmap = layer.render();
      for (let i = 0; i < bitmap.length; i++) {
        composite[i] = Math.min(composite[i], bitmap[i]);
      }
    }
    for (let i = 0; i < composite.length; i++) {
      image.data[i * 4] = image.data[i * 4 + 1] = image.data[i * 4 + 2] = composite[i];
      image.data[i * 4 + 3] = 255;
    }
    this.ctx.putImageData(image, 0, 0);
  }

  private refreshLayerList(root: HTMLElement): void {
    const list = root.querySelector('#layers') as HTMLUListElement;
    list.innerHTML = '';
    for (const layer of this.session.layers) {
      const item = document.createElement('li');
      const pick = document.createElement('button');
      pick.textContent = layer === this.activeLayer ? `[${layer.category}]` : layer.category;
      pick.onclick = () => {
        this.activeLayer = layer;
        this.refreshLayerList(root);
      };
      const text = document.createElement('input');
      text.placeholder = `describe the ${layer.category}`;
      text.value = this.session.texts.get(layer) ?? '';
      text.oninput = () => {
        this.session.setText(layer, text.value);
        this.refreshGenerateButton(root);
      };
      const vis = document.createElement('input');
      vis.type = 'checkbox';
      vis.checked = layer.visible;
      vis.onchange = () => {
        layer.visible = vis.checked;
        this.redraw();
      };
      item.append(pick, text, vis);
      list.append(item);
    }
  }

  private refreshGenerateButton(root: HTMLElement): void {
    const button = root.querySelector('#generate') as HTMLButtonElement;
    button.disabled = this.generating || !this.session.dirty
      || this.session.nonEmptyLayers().length === 0;
  }

  private async loadTask(root: HTMLElement): Promise<void> {
    const task = await this.api.nextTask();
    const panel = root.querySelector('#reference') as HTMLElement;
    if (!task) {
      panel.innerHTML = '<em>no tasks remaining</em>';
      return;
    }
    this.task = task;
    this.session.referenceImageId = task.image_id;
    panel.innerHTML = '';
    const img = document.createElement('img');
    img.src = `data:image/png;base64,${task.image}`;
    img.width = 160;
    panel.append(img);
    const regions = document.createElement('div');
    regions.textContent = task.regions.map((r) => r.category).join(', ');
    panel.append(regions);
  }

  private async generate(root: HTMLElement): Promise<void> {
    const alpha = Number((root.querySelector('#alpha') as HTMLInputElement).value);
    const seed = Number((root.querySelector('#seed') as HTMLInputElement).value);
    this.generating = true;
    this.refreshGenerateButton(root);
    this.setStatus('generating…');
    try {
      const resp = await this.api.generate(this.session.toGenerationRequest(alpha, seed));
      const strip = root.querySelector('#previews') as HTMLElement;
      const img = document.createElement('img');
      img.src = `data:image/png;base64,${resp.image}`;
      img.title = `seed ${seed}, alpha ${alpha}`;
      strip.prepend(img);
      this.session.dirty = false;
      this.setStatus(`done in ${resp.timings.total_s ?? '?'}s`);
    } catch (err) {
      if (err instanceof ServiceError && err.retryable) {
        this.setStatus('service busy (queue full), try again shortly');
      } else if (err instanceof ServiceError && err.field) {
        this.setStatus(`rejected: ${err.field}: ${err.message}`);
      } else {
        this.setStatus(`failed: ${(err as Error).message}`);
      }
    } finally {
      this.generating = false;
      this.refreshGenerateButton(root);
    }
  }

  private async submit(root: HTMLElement): Promise<void> {
    try {
      const sessionId = await this.api.submitAnnotation(this.session.exportSession());
      this.setStatus(`annotation stored as ${sessionId}`);
    } catch (err) {
      this.setStatus(`export blocked: ${(err as Error).message}`);
    }
  }

  private setStatus(text: string): void {
    const el = document.querySelector('#status');
    if (el) el.textContent = text;
  }
}
