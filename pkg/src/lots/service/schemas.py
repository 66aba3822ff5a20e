"""Request/response models for the /v1 API."""

from __future__ import annotations

import base64
import binascii
from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from ..dataset.synthetic import GLOBAL_CONTEXT

CANVAS_SIZE = 512


class SketchPair(BaseModel):
    sketch: str = Field(description="base64 PNG, single channel, 512x512")
    text: str = Field(min_length=1)
    layer_id: str = ""

    @field_validator("sketch")
    @classmethod
    def _decodable(cls, v: str) -> str:
        try:
            base64.b64decode(v, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"sketch is not valid base64: {exc}")
        return v


class GenerationRequest(BaseModel):
    pairs: list[SketchPair] = Field(min_length=1, max_length=6)
    global_context: str = GLOBAL_CONTEXT
    alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    seed: int = 0
    steps: int = Field(default=50, ge=1)
    variant: Literal["lots", "concat", "attn", "pool"] = "lots"


class GenerationResponse(BaseModel):
    request_id: str
    image: str
    timings: dict[str, float]


class Stroke(BaseModel):
    pointer_type: str = "mouse"
    started_at: float
    ended_at: float
    points: list[list[float]] = Field(description="[x, y, t] or [x, y, t, pressure] rows")

    @model_validator(mode="after")
    def _monotone(self) -> "Stroke":
        if self.ended_at < self.started_at:
            raise ValueError("stroke ends before it starts")
        return self


class AnnotationLayer(BaseModel):
    garment_category: str = Field(min_length=1)
    sketch: str = Field(description="base64 PNG, 512x512 white canvas")
    stroke_log: list[Stroke] = Field(default_factory=list)

    @field_validator("sketch")
    @classmethod
    def _decodable(cls, v: str) -> str:
        try:
            base64.b64decode(v, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"sketch is not valid base64: {exc}")
        return v


class AnnotationSession(BaseModel):
    reference_image_id: str
    layers: list[AnnotationLayer] = Field(min_length=1)
    device: Literal["mouse", "stylus"]
    started_at: float
    ended_at: float
    status: Literal["draft", "completed"] = "completed"

    @model_validator(mode="after")
    def _monotone(self) -> "AnnotationSession":
        if self.ended_at < self.started_at:
            raise ValueError("session ends before it starts")
        last = self.started_at
        for layer in self.layers:
            for stroke in layer.stroke_log:
                if stroke.started_at < self.started_at or stroke.ended_at > self.ended_at:
                    raise ValueError("stroke timestamps escape the session window")
                last = max(last, stroke.ended_at)
        return self


class AnnotationStored(BaseModel):
    session_id: str


class TaskRegion(BaseModel):
    category: str
    bbox: tuple[int, int, int, int]


class TaskResponse(BaseModel):
    image_id: str
    image: str
    regions: list[TaskRegion]


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool
    checkpoint: str | None
    queue_depth: int
