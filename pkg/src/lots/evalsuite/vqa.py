"""VQA-probability alignment metrics, whole-image and per-garment."""

from __future__ import annotations

import numpy as np

from ..dataset.manifest import tight_bbox
from ..errors import InvalidInputError
from .clipscores import LocalScore
from .oracles import VqaOracle

ALIGNMENT_QUESTION = "Does this figure show {caption}?"
ATTRIBUTE_QUESTION = "Is the {garment} {attribute}?"
CROP_MARGIN = 0.10


def vqa_score(image: np.ndarray, captions: list[str], oracle: VqaOracle) -> float:
    """Mean yes-probability over one alignment question per caption."""
    if len(captions) == 0:
        raise InvalidInputError("vqa_score needs at least one caption")
    probs = [oracle.prob_yes(image, ALIGNMENT_QUESTION.format(caption=c)) for c in captions]
    return float(np.mean(probs))


def margin_crop(image: np.ndarray, mask: np.ndarray,
                margin: float = CROP_MARGIN) -> np.ndarray | None:
    """Mask bbox expanded by the margin on every side, clamped to the image.

    Returns None for degenerate (empty) boxes.
    """
    top, left, bottom, right = tight_bbox(mask)
    if bottom - top <= 0 or right - left <= 0:
        return None
    dy = int(round((bottom - top) * margin))
    dx = int(round((right - left) * margin))
    h, w = np.asarray(mask).shape
    top = max(0, top - dy)
    bottom = min(h, bottom + dy)
    left = max(0, left - dx)
    right = min(w, right + dx)
    return np.asarray(image)[top:bottom, left:right]


def l_vqa_score(image: np.ndarray,
                garments: list[tuple[np.ndarray, list[str]]],
                oracle: VqaOracle) -> LocalScore:
    """Attribute questions answered on per-garment crops.

    Per-instance score is the mean over that instance's questions; the final
    score is the mean over instances. Degenerate boxes are skipped.
    """
    if len(garments) == 0:
        raise InvalidInputError("l_vqa_score needs at least one garment")
    per: list[float] = []
    skipped = 0
    for mask, questions in garments:
        crop = margin_crop(image, mask)
        if crop is None or crop.size == 0:
            skipped += 1
            continue
        if len(questions) == 0:
            raise InvalidInputError("garment instance has no questions")
        probs = [oracle.prob_yes(crop, q) for q in questions]
        per.append(float(np.mean(probs)))
    score = float(np.mean(per)) if per else 0.0
    return LocalScore(score=score, per_instance=per, skipped=skipped)


def attribute_questions(garment: str, attributes: list[str]) -> list[str]:
    return [ATTRIBUTE_QUESTION.format(garment=garment, attribute=a) for a in attributes]
