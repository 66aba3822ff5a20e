"""Dataset report: counts, caption lengths, device split, sketch SSIM."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .manifest import ManifestEntry, caption_tokens


def dataset_stats(entries: Sequence[ManifestEntry], root: str | Path | None = None,
                  with_ssim: bool = False) -> dict:
    """Exact counts over a manifest; SSIM summaries when images resolve."""
    pairs_per_image = [len(e.records) for e in entries]
    caption_lengths = [caption_tokens(r.caption) for e in entries for r in e.records]
    device_split: dict[str, int] = {}
    for e in entries:
        if e.split == "wild" and e.provenance:
            device = e.provenance.get("device", "unknown")
            device_split[device] = device_split.get(device, 0) + 1

    report = {
        "images": len(entries),
        "records": int(sum(pairs_per_image)),
        "pairs_per_image": {
            "min": int(min(pairs_per_image)) if pairs_per_image else 0,
            "mean": float(np.mean(pairs_per_image)) if pairs_per_image else 0.0,
            "max": int(max(pairs_per_image)) if pairs_per_image else 0,
        },
        "caption_words": {
            "mean": float(np.mean(caption_lengths)) if caption_lengths else 0.0,
            "max": int(max(caption_lengths)) if caption_lengths else 0,
        },
        "splits": _count(entries, lambda e: e.split),
        "device_split": device_split,
    }
    if with_ssim and root is not None:
        report["sketch_ssim_by_device"] = _ssim_by_device(entries, Path(root))
    return report


def _count(entries, key) -> dict[str, int]:
    out: dict[str, int] = {}
    for e in entries:
        k = key(e)
        out[k] = out.get(k, 0) + 1
    return out


def _ssim_by_device(entries: Sequence[ManifestEntry], root: Path) -> dict:
    from ..evalsuite.ssim import ssim

    scores: dict[str, list[float]] = {}
    for e in entries:
        if not e.image_path:
            continue
        image_file = root / e.image_path
        sketch_file = root / e.global_sketch_path
        if not image_file.exists() or not sketch_file.exists():
            continue
        device = (e.provenance or {}).get("device", "synthetic")
        img = np.asarray(Image.open(image_file).convert("L"), dtype=np.float64) / 255.0
        sk = np.asarray(Image.open(sketch_file).convert("L"), dtype=np.float64) / 255.0
        if img.shape != sk.shape:
            continue
        scores.setdefault(device, []).append(ssim(img, sk))
    return {
        device: {"mean": float(np.mean(vals)), "count": len(vals)}
        for device, vals in sorted(scores.items())
    }
