"""HTTP generation/annotation service consumed by the studio and scripts."""

from __future__ import annotations

import base64
import os
import time
import uuid
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..checkpoint import checkpoint_hash, load_checkpoint
from ..dataset.manifest import read_manifest
from ..errors import InvalidInputError
from .schemas import (
    AnnotationSession,
    AnnotationStored,
    GenerationRequest,
    GenerationResponse,
    HealthResponse,
    TaskRegion,
    TaskResponse,
)
from .state import (
    AnnotationStore,
    GenerationQueue,
    QueueFullError,
    TaskPool,
    encode_image_b64,
)

ENV_CKPT = "LOTS_CKPT"
ENV_DATA_DIR = "LOTS_DATA_DIR"
ENV_PORT = "LOTS_PORT"


def create_app(ckpt_path: str | None = None, data_dir: str | None = None,
               queue_depth: int = 8, lease_seconds: float | None = None) -> FastAPI:
    ckpt_path = ckpt_path or os.environ.get(ENV_CKPT)
    data_dir = data_dir or os.environ.get(ENV_DATA_DIR)

    app = FastAPI(title="lots generation service", version="1")
    app.state.ckpt_hash = None
    app.state.queue = None
    app.state.task_pool = None
    app.state.store = None
    app.state.entries = []

    if ckpt_path and Path(ckpt_path).exists():
        model = load_checkpoint(ckpt_path)
        model.eval()
        app.state.queue = GenerationQueue(model, depth=queue_depth)
        app.state.ckpt_hash = checkpoint_hash(ckpt_path)

    if data_dir:
        root = Path(data_dir)
        manifest = root / "manifest.jsonl"
        if manifest.exists():
            app.state.entries = read_manifest(manifest)
            kwargs = {"lease_seconds": lease_seconds} if lease_seconds else {}
            app.state.task_pool = TaskPool(app.state.entries, root, **kwargs)
        app.state.store = AnnotationStore(root / "annotations")
        app.state.data_root = root

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request, exc: RequestValidationError):
        first = exc.errors()[0]
        field = ".".join(str(p) for p in first.get("loc", []) if p != "body")
        return JSONResponse(
            status_code=400,
            content={"error": "invalid payload", "field": field or "body",
                     "detail": first.get("msg", "")},
        )

    @app.exception_handler(InvalidInputError)
    async def _invalid_input_handler(request, exc: InvalidInputError):
        return JSONResponse(status_code=400,
                            content={"error": "invalid payload", "detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        q = app.state.queue
        return HealthResponse(
            status="ok",
            model_loaded=q is not None,
            checkpoint=app.state.ckpt_hash,
            queue_depth=q.depth if q is not None else 0,
        )

    @app.post("/v1/generate", response_model=GenerationResponse)
    def generate(req: GenerationRequest):
        q: GenerationQueue | None = app.state.queue
        if q is None:
            return JSONResponse(status_code=409, content={"error": "model not loaded"})
        started = time.monotonic()
        try:
            image = q.submit(req)
        except QueueFullError:
            return JSONResponse(status_code=503, content={"error": "queue full"})
        elapsed = time.monotonic() - started
        return GenerationResponse(
            request_id=uuid.uuid4().hex[:12],
            image=encode_image_b64(image),
            timings={"total_s": round(elapsed, 4), "steps": float(req.steps)},
        )

    @app.post("/v1/annotations", response_model=AnnotationStored)
    def post_annotation(session: AnnotationSession):
        store: AnnotationStore | None = app.state.store
        if store is None:
            return JSONResponse(status_code=409, content={"error": "no data directory"})
        session_id = store.save(session)
        if app.state.task_pool is not None:
            app.state.task_pool.mark_completed(session.reference_image_id)
        return AnnotationStored(session_id=session_id)

    @app.get("/v1/annotations/{session_id}", response_model=AnnotationSession)
    def get_annotation(session_id: str):
        store: AnnotationStore | None = app.state.store
        session = store.load(session_id) if store is not None else None
        if session is None:
            return JSONResponse(status_code=404, content={"error": "unknown session id"})
        return session

    @app.get("/v1/tasks/next", response_model=TaskResponse)
    def next_task():
        pool: TaskPool | None = app.state.task_pool
        entry = pool.next_task() if pool is not None else None
        if entry is None:
            return Response(status_code=204)
        image_path = app.state.data_root / entry.image_path
        image_b64 = base64.b64encode(image_path.read_bytes()).decode("ascii")
        regions = [TaskRegion(category=r.category, bbox=r.bbox) for r in entry.records]
        return TaskResponse(image_id=entry.image_id, image=image_b64, regions=regions)

    return app
