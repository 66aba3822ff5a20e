"""Embedding-based alignment metrics over pluggable oracles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset.colors import composite_on_white
from ..errors import InvalidInputError, OracleError
from .oracles import EmbeddingOracle


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


def global_clip(gen: np.ndarray, gt: np.ndarray, oracle: EmbeddingOracle,
                sample_id: str = "") -> float:
    """Cosine similarity of the whole-image embeddings."""
    try:
        return cosine(oracle.embed_image(gen), oracle.embed_image(gt))
    except OracleError:
        raise
    except Exception as exc:
        raise OracleError(f"embedding failed: {exc}", sample_id=sample_id) from exc


@dataclass
class LocalScore:
    score: float
    per_instance: list[float] = field(default_factory=list)
    skipped: int = 0


def local_clip(gen: np.ndarray, gt: np.ndarray, masks: list[np.ndarray],
               oracle: EmbeddingOracle) -> LocalScore:
    """Per-garment cosine over white-composited mask regions, averaged.

    Empty masks are skipped and counted rather than scored.
    """
    if len(masks) == 0:
        raise InvalidInputError("local_clip needs at least one garment mask")
    per: list[float] = []
    skipped = 0
    for mask in masks:
        m = np.asarray(mask, dtype=bool)
        if not m.any():
            skipped += 1
            continue
        emb_gen = oracle.embed_image(composite_on_white(gen, m))
        emb_gt = oracle.embed_image(composite_on_white(gt, m))
        per.append(cosine(emb_gen, emb_gt))
    score = float(np.mean(per)) if per else 0.0
    return LocalScore(score=score, per_instance=per, skipped=skipped)
