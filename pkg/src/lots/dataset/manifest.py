"""Versioned JSONL manifest for garment datasets.

One image per line; every line is self-describing via its ``format`` field so
files can be concatenated and streamed. Serialization is canonical (sorted
keys, fixed separators) which makes rewrite round-trips byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import InvalidInputError, SchemaError

MANIFEST_FORMAT = "sketchy-manifest/1"
CAPTION_TOKEN_LIMIT = 90
SPLITS = ("train", "test", "wild")
DEVICES = ("mouse", "stylus")


def caption_tokens(caption: str) -> int:
    return len(caption.split())


@dataclass
class PartRecord:
    category: str
    attributes: list[str] = field(default_factory=list)


@dataclass
class GarmentRecord:
    """One whole-body garment with its attached parts and annotations."""

    category: str
    attributes: list[str] = field(default_factory=list)
    parts: list[PartRecord] = field(default_factory=list)
    caption: str = ""
    colors: list[str] = field(default_factory=list)
    sketch_path: str = ""
    mask_path: str | None = None
    bbox: tuple[int, int, int, int] = (0, 0, 0, 0)  # (top, left, bottom, right) exclusive
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.parts = [p if isinstance(p, PartRecord) else PartRecord(**p) for p in self.parts]
        self.bbox = tuple(int(v) for v in self.bbox)
        if caption_tokens(self.caption) > CAPTION_TOKEN_LIMIT:
            raise InvalidInputError(
                f"caption exceeds {CAPTION_TOKEN_LIMIT} tokens for {self.category!r}"
            )
        if not 1 <= len(self.colors) <= 3 and "no_colors" not in self.flags:
            raise InvalidInputError(
                f"{self.category!r} must carry 1-3 colors, got {len(self.colors)}"
            )


@dataclass
class ManifestEntry:
    """All records for one image plus the global conditioning artifacts."""

    image_id: str
    records: list[GarmentRecord]
    global_sketch_path: str
    global_context: str
    split: str
    image_path: str | None = None
    provenance: dict | None = None

    def __post_init__(self):
        self.records = [
            r if isinstance(r, GarmentRecord) else GarmentRecord(**r) for r in self.records
        ]
        if len(self.records) == 0:
            raise InvalidInputError(f"image {self.image_id} has no garment records")
        if self.split not in SPLITS:
            raise InvalidInputError(f"unknown split {self.split!r}")
        if self.split == "wild":
            device = (self.provenance or {}).get("device")
            if device not in DEVICES:
                raise InvalidInputError(
                    f"wild entry {self.image_id} needs provenance.device in {DEVICES}"
                )


_REQUIRED_FIELDS = ("format", "image_id", "records", "global_sketch_path",
                    "global_context", "split")


def entry_to_dict(entry: ManifestEntry) -> dict:
    d = asdict(entry)
    d["format"] = MANIFEST_FORMAT
    return d


def entry_from_dict(d: dict, lineno: int = 0) -> ManifestEntry:
    for key in _REQUIRED_FIELDS:
        if key not in d:
            raise SchemaError(f"line {lineno}: missing field {key!r}", field=key)
    if d["format"] != MANIFEST_FORMAT:
        raise SchemaError(
            f"line {lineno}: format {d['format']!r} != {MANIFEST_FORMAT}", field="format"
        )
    body = {k: v for k, v in d.items() if k != "format"}
    try:
        return ManifestEntry(**body)
    except TypeError as exc:
        raise SchemaError(f"line {lineno}: {exc}", field="records") from exc


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry_to_dict(entry), sort_keys=True,
                                separators=(",", ":")) + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: invalid JSON: {exc}", field=None) from exc
        entries.append(entry_from_dict(d, lineno))
    return entries


def tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """(top, left, bottom, right), exclusive bounds, of the True region."""
    ys, xs = np.nonzero(np.asarray(mask, dtype=bool))
    if ys.size == 0:
        return (0, 0, 0, 0)
    return (int(ys.min()), int(xs.min()), int(ys.max()) + 1, int(xs.max()) + 1)


def validate_entry_files(entry: ManifestEntry, root: Path) -> list[str]:
    """Paths that do not resolve under ``root``."""
    missing = []
    paths: list[str] = [entry.global_sketch_path]
    if entry.image_path:
        paths.append(entry.image_path)
    for r in entry.records:
        paths.append(r.sketch_path)
        if r.mask_path:
            paths.append(r.mask_path)
    for p in paths:
        if p and not (root / p).exists():
            missing.append(p)
    return missing
