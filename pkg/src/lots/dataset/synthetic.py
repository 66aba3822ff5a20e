"""Synthetic colored-shapes corpus.

Each sample is a white-background outfit of 2-3 disjoint garment regions
(hat / top / pants), each filled with one palette color and paired with an
outline sketch plus a one-line caption. The corpus exists to exercise the
training, sampling, and localization-evaluation paths end to end on a desk.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from ..types import ConditioningSet, LocalizedPair, SketchImage
from .manifest import GarmentRecord, ManifestEntry, tight_bbox, write_manifest
from .sketchops import compose_global_sketch, sketch_to_png_bytes

STUDY_COLORS: dict[str, tuple[float, float, float]] = {
    "red": (0.86, 0.13, 0.13),
    "green": (0.13, 0.63, 0.22),
    "blue": (0.16, 0.27, 0.86),
    "yellow": (0.92, 0.84, 0.16),
    "purple": (0.58, 0.20, 0.75),
    "orange": (0.95, 0.55, 0.12),
}

GLOBAL_CONTEXT = "A picture of a model posing, high-quality, 4k"


@dataclass
class SyntheticGarment:
    category: str
    color: str
    mask: np.ndarray
    sketch: SketchImage
    caption: str


@dataclass
class SyntheticSample:
    sample_id: str
    image: np.ndarray  # (H, W, 3) float in [0, 1]
    garments: list[SyntheticGarment]
    global_sketch: SketchImage


def _rect_mask(size: int, y0: int, y1: int, x0: int, x1: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    mask[y0:y1, x0:x1] = True
    return mask


def _garment_mask(category: str, rng: np.random.Generator, size: int) -> np.ndarray:
    s = size / 64.0

    def r(lo, hi):
        return int(round(lo * s)) + int(rng.integers(0, max(int(round((hi - lo) * s)), 1)))

    if category == "hat":
        y0, x0 = r(3, 6), r(22, 27)
        return _rect_mask(size, y0, y0 + r(6, 9), x0, x0 + r(14, 18))
    if category == "top":
        y0, x0 = r(15, 18), r(14, 18)
        return _rect_mask(size, y0, y0 + r(16, 20), x0, x0 + r(28, 33))
    if category == "pants":
        y0, x0 = r(37, 40), r(18, 22)
        return _rect_mask(size, y0, y0 + r(18, 21), x0, x0 + r(22, 26))
    raise ValueError(f"unknown synthetic category {category!r}")


def outline_sketch(mask: np.ndarray) -> SketchImage:
    """1-px boundary of the region, drawn dark on white."""
    eroded = ndimage.binary_erosion(mask)
    boundary = mask & ~eroded
    return SketchImage(np.where(boundary, 0.0, 1.0).astype(np.float32))


def make_sample(rng: np.random.Generator, sample_id: str, size: int = 64) -> SyntheticSample:
    n = int(rng.integers(2, 4))  # 2 or 3 garments
    categories = ["top", "pants"] if n == 2 else ["hat", "top", "pants"]
    names = list(STUDY_COLORS)
    colors = [names[i] for i in rng.choice(len(names), size=n, replace=False)]

    image = np.ones((size, size, 3), dtype=np.float32)
    garments = []
    for category, color in zip(categories, colors):
        mask = _garment_mask(category, rng, size)
        image[mask] = STUDY_COLORS[color]
        garments.append(SyntheticGarment(
            category=category,
            color=color,
            mask=mask,
            sketch=outline_sketch(mask),
            caption=f"a {color} {category}",
        ))
    global_sketch = compose_global_sketch([g.sketch for g in garments])
    return SyntheticSample(sample_id=sample_id, image=image, garments=garments,
                           global_sketch=global_sketch)


def generate_samples(n: int, seed: int = 0, size: int = 64) -> list[SyntheticSample]:
    rng = np.random.default_rng(seed)
    return [make_sample(rng, f"synth{seed:02d}_{i:05d}", size) for i in range(n)]


def sample_to_conditioning(sample: SyntheticSample, tokenizer) -> ConditioningSet:
    pairs = tuple(
        LocalizedPair(sketch=g.sketch, text=g.caption, token_ids=tokenizer.encode(g.caption),
                      garment_category=g.category, region_mask=g.mask)
        for g in sample.garments
    )
    return ConditioningSet(
        pairs=pairs,
        global_sketch=sample.global_sketch,
        global_context=GLOBAL_CONTEXT,
        global_context_ids=tokenizer.encode(GLOBAL_CONTEXT),
    )


def sample_to_training_item(sample: SyntheticSample, tokenizer):
    import torch

    x0 = torch.from_numpy(sample.image).permute(2, 0, 1) * 2.0 - 1.0
    return x0, sample_to_conditioning(sample, tokenizer)


def write_synthetic_dataset(out_dir: str | Path, n_train: int, n_test: int,
                            seed: int = 0, size: int = 64) -> Path:
    """Materialize the corpus on disk under a versioned manifest."""
    out = Path(out_dir)
    for sub in ("images", "sketches", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    splits = [("train", n_train, seed), ("test", n_test, seed + 1)]
    for split, count, split_seed in splits:
        for sample in generate_samples(count, seed=split_seed, size=size):
            sid = f"{split}_{sample.sample_id}"
            image_path = f"images/{sid}.png"
            Image.fromarray((sample.image * 255).astype(np.uint8)).save(out / image_path)
            global_path = f"sketches/{sid}_global.png"
            (out / global_path).write_bytes(sketch_to_png_bytes(sample.global_sketch))
            records = []
            for gi, g in enumerate(sample.garments):
                sketch_path = f"sketches/{sid}_{gi}.png"
                (out / sketch_path).write_bytes(sketch_to_png_bytes(g.sketch))
                mask_path = f"masks/{sid}_{gi}.png"
                Image.fromarray(g.mask.astype(np.uint8) * 255, mode="L").save(out / mask_path)
                records.append(GarmentRecord(
                    category=g.category,
                    caption=g.caption,
                    colors=[g.color],
                    sketch_path=sketch_path,
                    mask_path=mask_path,
                    bbox=tight_bbox(g.mask),
                ))
            entries.append(ManifestEntry(
                image_id=sid,
                records=records,
                global_sketch_path=global_path,
                global_context=GLOBAL_CONTEXT,
                split=split,
                image_path=image_path,
            ))
    manifest_path = out / "manifest.jsonl"
    write_manifest(entries, manifest_path)
    return manifest_path


def load_training_items(entries, root: str | Path, tokenizer, split: str = "train",
                        image_size: int | None = None) -> list:
    """Image tensors plus conditioning sets for the given split.

    With ``image_size`` set, stored images are area-resized onto the model
    resolution (box filter for images and sketches, nearest for masks).
    """
    import torch

    root = Path(root)
    items = []
    for e in entries:
        if e.split != split:
            continue
        img_pil = Image.open(root / e.image_path).convert("RGB")
        if image_size and img_pil.size != (image_size, image_size):
            img_pil = img_pil.resize((image_size, image_size), Image.BOX)
        img = np.asarray(img_pil, dtype=np.float32) / 255.0
        pairs = []
        for r in e.records:
            pairs.append(LocalizedPair(
                sketch=_load_sketch(root / r.sketch_path, image_size),
                text=r.caption,
                token_ids=tokenizer.encode(r.caption),
                garment_category=r.category,
                region_mask=_load_mask(root / r.mask_path, image_size)
                if r.mask_path else None,
            ))
        cs = ConditioningSet(
            pairs=tuple(pairs),
            global_sketch=_load_sketch(root / e.global_sketch_path, image_size),
            global_context=e.global_context,
            global_context_ids=tokenizer.encode(e.global_context),
        )
        x0 = torch.from_numpy(img).permute(2, 0, 1) * 2.0 - 1.0
        items.append((x0, cs, e))
    return items


def _load_sketch(path: Path, image_size: int | None) -> SketchImage:
    pil = Image.open(path).convert("L")
    if image_size and pil.size != (image_size, image_size):
        pil = pil.resize((image_size, image_size), Image.BOX)
    return SketchImage(np.asarray(pil, dtype=np.float32) / 255.0)


def _load_mask(path: Path, image_size: int | None) -> np.ndarray:
    pil = Image.open(path).convert("L")
    if image_size and pil.size != (image_size, image_size):
        pil = pil.resize((image_size, image_size), Image.NEAREST)
    return np.asarray(pil) > 127
