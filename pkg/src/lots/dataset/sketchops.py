"""Sketch composition and image preprocessing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from ..errors import InvalidInputError
from ..types import SketchImage


def compose_global_sketch(sketches: Sequence[SketchImage]) -> SketchImage:
    """Union of local sketches: pixelwise minimum intensity on white ground.

    Commutative, associative, idempotent; the blank sketch is the identity.
    """
    if len(sketches) == 0:
        raise InvalidInputError("cannot compose an empty sketch list")
    shape = sketches[0].shape
    for i, s in enumerate(sketches):
        if s.shape != shape:
            raise InvalidInputError(f"sketch {i} has shape {s.shape}, expected {shape}")
    stacked = np.stack([s.pixels for s in sketches])
    return SketchImage(stacked.min(axis=0))


def round_half_away(x: float) -> int:
    """Round to nearest integer, halves away from zero."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class SquarePad:
    """Resize-and-center geometry for one source size onto a square canvas.

    The longest side scales to ``target``; the short side follows the same
    factor with round-half-away rounding, then the content is centered.
    """

    source_h: int
    source_w: int
    target: int
    scale: float
    content_h: int
    content_w: int
    top: int
    left: int

    @classmethod
    def for_size(cls, height: int, width: int, target: int = 512) -> "SquarePad":
        if height <= 0 or width <= 0:
            raise InvalidInputError(f"zero-area input {height}x{width}")
        scale = target / max(height, width)
        content_h = min(round_half_away(height * scale), target)
        content_w = min(round_half_away(width * scale), target)
        top = (target - content_h) // 2
        left = (target - content_w) // 2
        return cls(height, width, target, scale, content_h, content_w, top, left)

    def _paste(self, resized: np.ndarray, fill) -> np.ndarray:
        if resized.ndim == 2:
            canvas = np.full((self.target, self.target), fill, dtype=resized.dtype)
        else:
            canvas = np.full((self.target, self.target, resized.shape[2]), fill,
                             dtype=resized.dtype)
        canvas[self.top:self.top + self.content_h, self.left:self.left + self.content_w] = resized
        return canvas

    def apply_image(self, img: np.ndarray) -> np.ndarray:
        """Float image in [0, 1], grayscale or RGB; pads with white."""
        arr = np.asarray(img, dtype=np.float32)
        if arr.shape[:2] != (self.source_h, self.source_w):
            raise InvalidInputError("image does not match the transform's source size")
        mode = "RGB" if arr.ndim == 3 else "F"
        pil = Image.fromarray((arr * 255).astype(np.uint8) if arr.ndim == 3 else arr, mode=mode)
        resized = pil.resize((self.content_w, self.content_h), Image.BILINEAR)
        res = np.asarray(resized, dtype=np.float32)
        if arr.ndim == 3:
            res = res / 255.0
        return self._paste(res, 1.0)

    def apply_mask(self, mask: np.ndarray) -> np.ndarray:
        """Binary mask; nearest-neighbor resize, pads with background."""
        arr = np.asarray(mask).astype(np.uint8)
        if arr.shape != (self.source_h, self.source_w):
            raise InvalidInputError("mask does not match the transform's source size")
        pil = Image.fromarray(arr * 255, mode="L")
        resized = pil.resize((self.content_w, self.content_h), Image.NEAREST)
        res = np.asarray(resized) > 127
        return self._paste(res, False)

    def apply_sketch(self, sketch: SketchImage) -> SketchImage:
        return SketchImage(np.clip(self.apply_image(sketch.pixels), 0.0, 1.0))


def preprocess_image(img: np.ndarray, target: int = 512) -> np.ndarray:
    """Scale the longest side to ``target`` and center on a white square."""
    arr = np.asarray(img)
    pad = SquarePad.for_size(arr.shape[0], arr.shape[1], target)
    return pad.apply_image(arr)


def edge_sketch(img: np.ndarray, threshold: float = 0.15) -> SketchImage:
    """Crude photo-to-sketch stand-in: gradient magnitude, thresholded.

    Real pipelines hand in sketches drawn or precomputed elsewhere; this stub
    exists so synthetic tests can run without that external step.
    """
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    gy, gx = np.gradient(arr)
    mag = np.hypot(gx, gy)
    strokes = mag > threshold
    return SketchImage(np.where(strokes, 0.0, 1.0).astype(np.float32))


def sketch_to_png_bytes(sketch: SketchImage) -> bytes:
    """Single-channel 8-bit PNG, white = 255 background."""
    import io

    arr = np.clip(sketch.pixels * 255.0, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def sketch_from_png_bytes(data: bytes) -> SketchImage:
    import io

    pil = Image.open(io.BytesIO(data)).convert("L")
    return SketchImage(np.asarray(pil, dtype=np.float32) / 255.0)


def downscale_area(sketch: SketchImage, size: int) -> SketchImage:
    """Area-average downscale, used to map studio canvases onto model inputs."""
    h, w = sketch.shape
    if h % size != 0 or w % size != 0:
        raise InvalidInputError(f"cannot area-average {h}x{w} onto {size}x{size}")
    fh, fw = h // size, w // size
    px = sketch.pixels.reshape(size, fh, size, fw).mean(axis=(1, 3))
    return SketchImage(px.astype(np.float32))
