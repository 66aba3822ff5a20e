from .captions import CAPTION_INSTRUCTION, caption_garment, template_caption
from .colors import COLOR_QUESTION, PALETTE_24, extract_colors, fallback_colors
from .hierarchy import CategoryKind, HierarchyNode, RawAnnotation, build_hierarchy
from .manifest import (
    CAPTION_TOKEN_LIMIT,
    MANIFEST_FORMAT,
    GarmentRecord,
    ManifestEntry,
    PartRecord,
    read_manifest,
    tight_bbox,
    write_manifest,
)
from .sketchops import (
    SquarePad,
    compose_global_sketch,
    downscale_area,
    edge_sketch,
    preprocess_image,
    sketch_from_png_bytes,
    sketch_to_png_bytes,
)
from .stats import dataset_stats
from .synthetic import (
    GLOBAL_CONTEXT,
    STUDY_COLORS,
    SyntheticSample,
    generate_samples,
    load_training_items,
    sample_to_conditioning,
    sample_to_training_item,
    write_synthetic_dataset,
)

__all__ = [
    "CAPTION_INSTRUCTION",
    "caption_garment",
    "template_caption",
    "COLOR_QUESTION",
    "PALETTE_24",
    "extract_colors",
    "fallback_colors",
    "CategoryKind",
    "HierarchyNode",
    "RawAnnotation",
    "build_hierarchy",
    "CAPTION_TOKEN_LIMIT",
    "MANIFEST_FORMAT",
    "GarmentRecord",
    "ManifestEntry",
    "PartRecord",
    "read_manifest",
    "tight_bbox",
    "write_manifest",
    "SquarePad",
    "compose_global_sketch",
    "downscale_area",
    "edge_sketch",
    "preprocess_image",
    "sketch_from_png_bytes",
    "sketch_to_png_bytes",
    "dataset_stats",
    "GLOBAL_CONTEXT",
    "STUDY_COLORS",
    "SyntheticSample",
    "generate_samples",
    "load_training_items",
    "sample_to_conditioning",
    "sample_to_training_item",
    "write_synthetic_dataset",
]
