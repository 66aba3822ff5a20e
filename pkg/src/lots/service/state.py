"""Server-side state: sampling queue, task claims, annotation persistence."""

from __future__ import annotations

import base64
import io
import json
import queue
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..dataset.manifest import GarmentRecord, ManifestEntry, read_manifest
from ..dataset.sketchops import compose_global_sketch, downscale_area, sketch_from_png_bytes
from ..diffusion import LotsModel, SamplerConfig, sample
from ..errors import InvalidInputError
from ..types import ConditioningSet, LocalizedPair, Variant
from .schemas import AnnotationSession, GenerationRequest

LEASE_SECONDS = 30 * 60


def decode_sketch_b64(data: str, expect_size: int = 512):
    raw = base64.b64decode(data)
    sketch = sketch_from_png_bytes(raw)
    if sketch.shape != (expect_size, expect_size):
        raise InvalidInputError(
            f"sketch must be {expect_size}x{expect_size}, got {sketch.shape}"
        )
    return sketch


def encode_image_b64(image: np.ndarray) -> str:
    arr = (np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def request_to_conditioning(req: GenerationRequest, model: LotsModel) -> ConditioningSet:
    """Decode the layer sketches, downscale to model resolution, and build the
    conditioning set; the global sketch is the union of the layers."""
    size = model.image_size
    tok = model.tokenizer
    pairs = []
    for p in req.pairs:
        sketch = decode_sketch_b64(p.sketch)
        pairs.append(LocalizedPair(
            sketch=downscale_area(sketch, size),
            text=p.text,
            token_ids=tok.encode(p.text),
            garment_category=p.layer_id,
        ))
    global_sketch = compose_global_sketch([p.sketch for p in pairs])
    return ConditioningSet(
        pairs=tuple(pairs),
        global_sketch=global_sketch,
        global_context=req.global_context,
        global_context_ids=tok.encode(req.global_context),
    )


class QueueFullError(Exception):
    pass


@dataclass
class _Job:
    request: GenerationRequest
    done: threading.Event
    result: np.ndarray | None = None
    error: Exception | None = None


class GenerationQueue:
    """Bounded FIFO with a single sampling worker.

    Full queue means immediate backpressure for the caller rather than an
    unbounded wait; sampling itself is serialized.
    """

    def __init__(self, model: LotsModel, depth: int = 8):
        self.model = model
        self.jobs: queue.Queue[_Job] = queue.Queue(maxsize=depth)
        self.worker = threading.Thread(target=self._run, daemon=True)
        self.worker.start()

    @property
    def depth(self) -> int:
        return self.jobs.qsize()

    def submit(self, request: GenerationRequest, timeout: float = 300.0) -> np.ndarray:
        job = _Job(request=request, done=threading.Event())
        try:
            self.jobs.put_nowait(job)
        except queue.Full:
            raise QueueFullError("generation queue is full")
        if not job.done.wait(timeout):
            raise TimeoutError("generation timed out")
        if job.error is not None:
            raise job.error
        return job.result

    def _run(self) -> None:
        while True:
            job = self.jobs.get()
            try:
                job.result = self._generate(job.request)
            except Exception as exc:  # noqa: BLE001 - handed back to the caller
                job.error = exc
            finally:
                job.done.set()

    def _generate(self, req: GenerationRequest) -> np.ndarray:
        cs = request_to_conditioning(req, self.model)
        cfg = SamplerConfig(steps=req.steps, seed=req.seed, alpha=req.alpha)
        images = sample([cs], cfg, self.model, variant=Variant(req.variant))
        return images[0].permute(1, 2, 0).numpy()


class TaskPool:
    """Unannotated reference images handed out under an atomic lease."""

    def __init__(self, entries: list[ManifestEntry], root: Path,
                 lease_seconds: float = LEASE_SECONDS):
        self.entries = {e.image_id: e for e in entries}
        self.root = root
        self.lease_seconds = lease_seconds
        self.claims: dict[str, float] = {}
        self.completed: set[str] = set()
        self.lock = threading.Lock()

    def next_task(self) -> ManifestEntry | None:
        now = time.monotonic()
        with self.lock:
            for image_id, entry in self.entries.items():
                if image_id in self.completed:
                    continue
                claimed_at = self.claims.get(image_id)
                if claimed_at is not None and now - claimed_at < self.lease_seconds:
                    continue
                self.claims[image_id] = now
                return entry
        return None

    def mark_completed(self, image_id: str) -> None:
        with self.lock:
            self.completed.add(image_id)
            self.claims.pop(image_id, None)


class AnnotationStore:
    """Append-only session store: one directory per session on disk."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def save(self, session: AnnotationSession) -> str:
        session_id = uuid.uuid4().hex[:12]
        session_dir = self.root / session_id
        session_dir.mkdir(parents=True)
        meta = session.model_dump()
        for i, layer in enumerate(session.layers):
            raw = base64.b64decode(layer.sketch)
            decode_sketch_b64(layer.sketch)  # enforce the 512-canvas contract
            (session_dir / f"layer_{i}.png").write_bytes(raw)
            meta["layers"][i]["sketch"] = f"layer_{i}.png"
        (session_dir / "metadata.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
        )
        return session_id

    def load(self, session_id: str) -> AnnotationSession | None:
        session_dir = self.root / session_id
        meta_path = session_dir / "metadata.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        for layer in meta["layers"]:
            raw = (session_dir / layer["sketch"]).read_bytes()
            layer["sketch"] = base64.b64encode(raw).decode("ascii")
        # re-validate against the schema on every read
        return AnnotationSession.model_validate(meta)

    def session_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "metadata.json").exists())


def export_wild_entries(store: AnnotationStore,
                        reference_entries: list[ManifestEntry]) -> list[ManifestEntry]:
    """Convert stored sessions into wild-split manifest entries.

    Captions and colors are inherited from the reference records (matched by
    garment category); the sketches are the human-drawn layers.
    """
    by_id = {e.image_id: e for e in reference_entries}
    out: list[ManifestEntry] = []
    for session_id in store.session_ids():
        session = store.load(session_id)
        ref = by_id.get(session.reference_image_id)
        ref_records = {r.category: r for r in ref.records} if ref else {}
        records = []
        for i, layer in enumerate(session.layers):
            ref_record = ref_records.get(layer.garment_category)
            if ref_record is not None:
                caption, colors, flags = ref_record.caption, list(ref_record.colors), []
            else:
                caption, colors, flags = f"a {layer.garment_category}", [], ["no_colors"]
            records.append(GarmentRecord(
                category=layer.garment_category,
                caption=caption,
                colors=colors,
                sketch_path=f"{session_id}/layer_{i}.png",
                flags=flags,
            ))
        out.append(ManifestEntry(
            image_id=f"wild_{session_id}",
            records=records,
            global_sketch_path=f"{session_id}/layer_0.png",
            global_context=ref.global_context if ref else "",
            split="wild",
            provenance={
                "device": session.device,
                "started_at": session.started_at,
                "ended_at": session.ended_at,
                "status": session.status,
                "reference_image_id": session.reference_image_id,
            },
        ))
    return out
