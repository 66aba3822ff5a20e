"""Evaluation runner and the versioned report it emits."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..dataset.manifest import ManifestEntry
from ..errors import InvalidInputError, SchemaError
from .clipscores import global_clip, local_clip
from .fid import fid
from .oracles import EmbeddingOracle, VqaOracle
from .ssim import ssim
from .vqa import attribute_questions, l_vqa_score, vqa_score

REPORT_FORMAT = "lots-eval-report/1"
KNOWN_METRICS = ("ssim", "fid", "globalclip", "localclip", "vqa", "lvqa")


@dataclass
class EvalReport:
    metrics: dict[str, float]
    per_sample: list[dict]
    samples: int
    oracles: dict[str, str]
    seed: int
    format: str = REPORT_FORMAT

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("format") != REPORT_FORMAT:
            raise SchemaError(f"report format {d.get('format')!r}", field="format")
        return cls(**d)

    def check_aggregates(self, atol: float = 1e-9) -> None:
        """Every per-sample metric's aggregate must equal the breakdown mean."""
        for name, value in self.metrics.items():
            if name == "fid":
                continue  # distribution-level metric, no per-sample rows
            rows = [r[name] for r in self.per_sample if name in r]
            if rows and abs(float(np.mean(rows)) - value) > atol:
                raise InvalidInputError(f"aggregate {name} diverges from its breakdown")


def _load_image(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def _load_mask(path: Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) > 127


def run_eval(entries: list[ManifestEntry], root: str | Path, gen_dir: str | Path,
             metrics: list[str], embed_oracle: EmbeddingOracle | None = None,
             vqa_oracle: VqaOracle | None = None, seed: int = 0) -> EvalReport:
    """Score generated images in ``gen_dir`` against the manifest's ground truth.

    Generated files are looked up as ``{image_id}.png``. Entries without a
    generated image are recorded as skipped rows, not silently dropped.
    """
    for m in metrics:
        if m not in KNOWN_METRICS:
            raise InvalidInputError(f"unknown metric {m!r}; known: {KNOWN_METRICS}")
    root, gen_dir = Path(root), Path(gen_dir)
    needs_embed = {"fid", "globalclip", "localclip"} & set(metrics)
    needs_vqa = {"vqa", "lvqa"} & set(metrics)
    if needs_embed and embed_oracle is None:
        raise InvalidInputError(f"metrics {sorted(needs_embed)} need an embedding oracle")
    if needs_vqa and vqa_oracle is None:
        raise InvalidInputError(f"metrics {sorted(needs_vqa)} need a VQA oracle")

    rows: list[dict] = []
    gen_feats, gt_feats = [], []
    for entry in entries:
        row: dict = {"image_id": entry.image_id}
        gen_path = gen_dir / f"{entry.image_id}.png"
        if not gen_path.exists():
            row["skipped"] = "missing generated image"
            rows.append(row)
            continue
        gen = _load_image(gen_path)
        gt = _load_image(root / entry.image_path) if entry.image_path else None

        if "ssim" in metrics and gt is not None:
            row["ssim"] = ssim(gen, gt)
        if "globalclip" in metrics and gt is not None:
            row["globalclip"] = global_clip(gen, gt, embed_oracle, entry.image_id)
        if "localclip" in metrics and gt is not None:
            masks = [_load_mask(root / r.mask_path) for r in entry.records if r.mask_path]
            if masks:
                row["localclip"] = local_clip(gen, gt, masks, embed_oracle).score
        if "vqa" in metrics:
            row["vqa"] = vqa_score(gen, [r.caption for r in entry.records], vqa_oracle)
        if "lvqa" in metrics:
            garments = []
            for r in entry.records:
                if not r.mask_path:
                    continue
                questions = attribute_questions(r.category, r.colors + r.attributes)
                garments.append((_load_mask(root / r.mask_path), questions))
            if garments:
                row["lvqa"] = l_vqa_score(gen, garments, vqa_oracle).score
        if "fid" in metrics and gt is not None:
            gen_feats.append(embed_oracle.embed_image(gen))
            gt_feats.append(embed_oracle.embed_image(gt))
        rows.append(row)

    scored = [r for r in rows if "skipped" not in r]
    if not scored:
        raise InvalidInputError(f"no generated images found under {gen_dir}")

    aggregates: dict[str, float] = {}
    for name in metrics:
        if name == "fid":
            continue
        vals = [r[name] for r in rows if name in r]
        if vals:
            aggregates[name] = float(np.mean(vals))
    if "fid" in metrics and len(gen_feats) >= 2:
        aggregates["fid"] = fid(np.stack(gen_feats), np.stack(gt_feats))

    oracles = {}
    if embed_oracle is not None:
        oracles["embedding"] = embed_oracle.identifier
    if vqa_oracle is not None:
        oracles["vqa"] = vqa_oracle.identifier
    return EvalReport(metrics=aggregates, per_sample=rows, samples=len(scored),
                      oracles=oracles, seed=seed)
