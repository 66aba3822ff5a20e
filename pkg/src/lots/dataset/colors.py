"""Garment color extraction.

The remote path asks a vision-QA model the fixed main-colors question over a
white-composited garment crop. The fallback clusters masked pixels in Lab
space and snaps cluster centers onto a fixed 24-name palette. Crops whose
mask box is smaller than 256 px on its longest side are Lanczos-upsampled
first so small garments keep usable color detail.
"""

from __future__ import annotations

import io
import logging

import numpy as np
from PIL import Image

from .clients import ClientError, VisionQAClient
from .manifest import tight_bbox

log = logging.getLogger(__name__)

COLOR_QUESTION = "What are the main colors? Ignore the white background."
UPSAMPLE_THRESHOLD = 256
MIN_CLUSTER_MASS = 0.15

# CSS basic colors plus common fashion tones; RGB in [0, 255].
PALETTE_24: dict[str, tuple[int, int, int]] = {
    "black": (0, 0, 0),
    "white": (255, 255, 255),
    "gray": (128, 128, 128),
    "silver": (192, 192, 192),
    "red": (220, 20, 60),
    "maroon": (128, 0, 0),
    "orange": (255, 140, 0),
    "yellow": (255, 215, 0),
    "olive": (128, 128, 0),
    "lime": (50, 205, 50),
    "green": (0, 128, 0),
    "teal": (0, 128, 128),
    "aqua": (0, 255, 255),
    "blue": (30, 60, 220),
    "navy": (0, 0, 128),
    "purple": (128, 0, 128),
    "fuchsia": (255, 0, 255),
    "pink": (255, 150, 180),
    "brown": (139, 90, 43),
    "tan": (210, 180, 140),
    "beige": (245, 245, 220),
    "khaki": (195, 176, 145),
    "cream": (255, 253, 230),
    "burgundy": (128, 0, 48),
}


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB in [0, 1] (..., 3) to CIELAB under D65."""
    rgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    m = np.array([
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ])
    xyz = linear @ m.T
    white = np.array([0.95047, 1.0, 1.08883])
    ratio = xyz / white
    f = np.where(ratio > 0.008856, np.cbrt(ratio), 7.787 * ratio + 16.0 / 116.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


_PALETTE_NAMES = list(PALETTE_24.keys())
_PALETTE_LAB = None


def _palette_lab() -> np.ndarray:
    global _PALETTE_LAB
    if _PALETTE_LAB is None:
        arr = np.array([PALETTE_24[n] for n in _PALETTE_NAMES], dtype=np.float64) / 255.0
        _PALETTE_LAB = rgb_to_lab(arr)
    return _PALETTE_LAB


def nearest_palette_name(rgb: np.ndarray) -> str:
    lab = rgb_to_lab(np.asarray(rgb, dtype=np.float64))
    dist = np.linalg.norm(_palette_lab() - lab, axis=1)
    return _PALETTE_NAMES[int(np.argmin(dist))]


def _kmeans(points: np.ndarray, k: int = 3, iters: int = 25, seed: int = 0):
    """Plain Lloyd iterations with seeded k-means++ init; deterministic."""
    rng = np.random.default_rng(seed)
    n = points.shape[0]
    centers = points[[int(rng.integers(n))]]
    while centers.shape[0] < k:
        d2 = np.min(((points[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 1e-12:
            centers = np.vstack([centers, points[[int(rng.integers(n))]]])
            continue
        centers = np.vstack([centers, points[[int(np.argmax(d2))]]])
    for _ in range(iters):
        d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
        assign = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            sel = assign == c
            if sel.any():
                new_centers[c] = points[sel].mean(axis=0)
        if np.allclose(new_centers, centers):
            centers = new_centers
            break
        centers = new_centers
    d2 = ((points[:, None, :] - centers[None]) ** 2).sum(-1)
    assign = d2.argmin(axis=1)
    return centers, assign


def composite_on_white(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Garment pixels kept, everything else white; float RGB in [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    out = np.ones_like(img)
    m = np.asarray(mask, dtype=bool)
    out[m] = img[m]
    return out


def garment_crop(image: np.ndarray, mask: np.ndarray,
                 upsample: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """White-composited crop of the mask's tight box, plus the cropped mask.

    With ``upsample`` (the client-query path) the Lanczos rule applies when
    the box's longest side is below the resolution threshold.
    """
    top, left, bottom, right = tight_bbox(mask)
    comp = composite_on_white(image, mask)[top:bottom, left:right]
    m = np.asarray(mask, dtype=bool)[top:bottom, left:right]
    longest = max(comp.shape[0], comp.shape[1])
    if upsample and 0 < longest < UPSAMPLE_THRESHOLD:
        scale = UPSAMPLE_THRESHOLD / longest
        new_w = max(1, round(comp.shape[1] * scale))
        new_h = max(1, round(comp.shape[0] * scale))
        pil = Image.fromarray((comp * 255).astype(np.uint8))
        comp = np.asarray(pil.resize((new_w, new_h), Image.LANCZOS), dtype=np.float64) / 255.0
        mask_pil = Image.fromarray(m.astype(np.uint8) * 255, mode="L")
        m = np.asarray(mask_pil.resize((new_w, new_h), Image.NEAREST)) > 127
    return comp, m


def needs_upsampling(mask: np.ndarray) -> bool:
    top, left, bottom, right = tight_bbox(mask)
    longest = max(bottom - top, right - left)
    return 0 < longest < UPSAMPLE_THRESHOLD


def fallback_colors(image: np.ndarray, mask: np.ndarray, seed: int = 0) -> list[str]:
    """Cluster masked pixels (3 clusters, Lab space), snap to the palette, and
    keep clusters covering at least 15% of the garment, largest first."""
    crop, m = garment_crop(image, mask)
    pixels = crop[m]
    if pixels.shape[0] == 0:
        return []
    lab = rgb_to_lab(pixels)
    k = min(3, pixels.shape[0])
    _, assign = _kmeans(lab, k=k, seed=seed)
    total = assign.shape[0]
    by_name: dict[str, float] = {}
    for c in range(k):
        sel = assign == c
        mass = float(sel.sum()) / total
        if mass < MIN_CLUSTER_MASS:
            continue
        mean_rgb = pixels[sel].mean(axis=0)
        name = nearest_palette_name(mean_rgb)
        by_name[name] = by_name.get(name, 0.0) + mass
    ranked = sorted(by_name.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:3]]


def extract_colors(image: np.ndarray, mask: np.ndarray,
                   client: VisionQAClient | None = None,
                   seed: int = 0) -> tuple[list[str], list[str]]:
    """1-3 color names for one garment instance; returns (colors, flags)."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return [], ["no_colors"]
    flags: list[str] = []
    if client is not None:
        crop, _ = garment_crop(image, m, upsample=True)
        png = _to_png(crop)
        try:
            reply = client.ask(png, COLOR_QUESTION)
            colors = _parse_color_reply(reply)
            if colors:
                return colors[:3], flags
            flags.append("color_fallback")
        except ClientError as exc:
            log.warning("color client failed (%s); using fallback extractor", exc)
            flags.append("color_fallback")
    colors = fallback_colors(image, m, seed=seed)
    if not colors:
        return [], ["no_colors"]
    return colors, flags


def _parse_color_reply(reply: str) -> list[str]:
    words = reply.lower().replace(",", " ").split()
    seen: list[str] = []
    for w in words:
        if w in PALETTE_24 and w not in seen:
            seen.append(w)
    return seen


def _to_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray((np.clip(image, 0, 1) * 255).astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()
