"""Dataset build: raw annotation dumps to a padded, captioned manifest.

Raw input layout (``--input`` directory):

    annotations.jsonl    one image per line:
                         {"image_id", "image_path", "split"?, "annotations":
                          [{"category", "kind", "mask_path",
                            "attributes"?, "sketch_path"?}]}
    plus the referenced image/mask/sketch files.

Sketches are taken from ``sketch_path`` when precomputed; otherwise the
edge-extraction stub derives one from the masked image region.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import NoWholeBodyItemsError, SchemaError
from ..types import SketchImage
from .captions import caption_garment
from .clients import TextGenClient, VisionQAClient
from .colors import composite_on_white, extract_colors
from .hierarchy import CategoryKind, RawAnnotation, build_hierarchy
from .manifest import (
    GarmentRecord,
    ManifestEntry,
    PartRecord,
    tight_bbox,
    write_manifest,
)
from .sketchops import SquarePad, compose_global_sketch, edge_sketch, sketch_to_png_bytes

log = logging.getLogger(__name__)

TARGET_SIZE = 512


def _load_image(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0


def _load_mask(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) > 127


def build_dataset(input_dir: str | Path, out_dir: str | Path,
                  caption_client: TextGenClient | None = None,
                  color_client: VisionQAClient | None = None,
                  seed: int = 0) -> Path:
    """Run the full pipeline and write the manifest; returns its path."""
    input_dir, out_dir = Path(input_dir), Path(out_dir)
    raw_path = input_dir / "annotations.jsonl"
    if not raw_path.exists():
        raise SchemaError(f"missing {raw_path}", field="annotations.jsonl")
    for sub in ("images", "sketches", "masks"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    for lineno, line in enumerate(raw_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        raw = json.loads(line)
        try:
            entry = _build_one(raw, input_dir, out_dir, caption_client, color_client, seed)
        except NoWholeBodyItemsError:
            log.warning("image %s has no whole-body items; skipped",
                        raw.get("image_id", f"line {lineno}"))
            continue
        entries.append(entry)
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(entries, manifest_path)
    return manifest_path


def _build_one(raw: dict, input_dir: Path, out_dir: Path,
               caption_client, color_client, seed: int) -> ManifestEntry:
    image_id = raw["image_id"]
    image = _load_image(input_dir / raw["image_path"])
    pad = SquarePad.for_size(image.shape[0], image.shape[1], TARGET_SIZE)
    padded_image = pad.apply_image(image)

    annotations = []
    sketch_files: dict[int, Path] = {}
    for i, a in enumerate(raw["annotations"]):
        annotations.append(RawAnnotation(
            image_id=image_id,
            category=a["category"],
            kind=CategoryKind(a["kind"]),
            mask=_load_mask(input_dir / a["mask_path"]),
            attributes=list(a.get("attributes", [])),
        ))
        if a.get("sketch_path"):
            sketch_files[i] = input_dir / a["sketch_path"]
    nodes = build_hierarchy(annotations)

    index_of = {id(a): i for i, a in enumerate(annotations)}
    records: list[GarmentRecord] = []
    garment_sketches: list[SketchImage] = []
    for gi, node in enumerate(nodes):
        mask = pad.apply_mask(node.whole.mask)
        raw_idx = index_of[id(node.whole)]
        if raw_idx in sketch_files:
            sk = np.asarray(Image.open(sketch_files[raw_idx]).convert("L"),
                            dtype=np.float32) / 255.0
            sketch = pad.apply_sketch(SketchImage(sk))
        else:
            sketch = edge_sketch(composite_on_white(padded_image, mask))
        garment_sketches.append(sketch)

        colors, color_flags = extract_colors(padded_image, mask, client=color_client,
                                             seed=seed)
        proto = GarmentRecord(
            category=node.whole.category,
            attributes=list(node.whole.attributes),
            parts=[PartRecord(category=p.category, attributes=list(p.attributes))
                   for p in node.parts],
            colors=colors,
            flags=list(color_flags) or [],
        ) if colors or "no_colors" in color_flags else None
        if proto is None:
            proto = GarmentRecord(category=node.whole.category, colors=[],
                                  flags=["no_colors"])
        caption, caption_flags = caption_garment(proto, client=caption_client)

        sketch_path = f"sketches/{image_id}_{gi}.png"
        mask_path = f"masks/{image_id}_{gi}.png"
        (out_dir / sketch_path).write_bytes(sketch_to_png_bytes(sketch))
        Image.fromarray(mask.astype(np.uint8) * 255, mode="L").save(out_dir / mask_path)
        records.append(GarmentRecord(
            category=proto.category,
            attributes=proto.attributes,
            parts=proto.parts,
            caption=caption,
            colors=proto.colors,
            sketch_path=sketch_path,
            mask_path=mask_path,
            bbox=tight_bbox(mask),
            flags=sorted(set(proto.flags) | set(caption_flags)),
        ))

    image_path = f"images/{image_id}.png"
    Image.fromarray((padded_image * 255).astype(np.uint8)).save(out_dir / image_path)
    global_path = f"sketches/{image_id}_global.png"
    (out_dir / global_path).write_bytes(
        sketch_to_png_bytes(compose_global_sketch(garment_sketches))
    )
    from .synthetic import GLOBAL_CONTEXT

    return ManifestEntry(
        image_id=image_id,
        records=records,
        global_sketch_path=global_path,
        global_context=raw.get("global_context", GLOBAL_CONTEXT),
        split=raw.get("split", "train"),
        image_path=image_path,
    )
