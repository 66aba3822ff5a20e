"""Two-level garment hierarchy from segmentation overlap."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from ..errors import InvalidInputError, NoWholeBodyItemsError

log = logging.getLogger(__name__)


class CategoryKind(str, Enum):
    WHOLE_BODY = "whole_body"
    GARMENT_PART = "garment_part"


@dataclass
class RawAnnotation:
    image_id: str
    category: str
    kind: CategoryKind
    mask: np.ndarray
    attributes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.kind = CategoryKind(self.kind)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise InvalidInputError(f"mask for {self.category} must be 2-D")


@dataclass
class HierarchyNode:
    """One whole-body garment with the parts attached to it."""

    whole: RawAnnotation
    parts: list[RawAnnotation] = field(default_factory=list)


def build_hierarchy(annotations: Sequence[RawAnnotation]) -> list[HierarchyNode]:
    """Attach each garment part to the whole-body item it overlaps most.

    Overlap is the absolute pixel count of the mask intersection. Parts with
    zero overlap against every whole-body item are dropped. Ties break toward
    the smaller whole-body mask, then the lexicographically smaller category.
    """
    wholes = [a for a in annotations if a.kind == CategoryKind.WHOLE_BODY]
    parts = [a for a in annotations if a.kind == CategoryKind.GARMENT_PART]
    if not wholes:
        raise NoWholeBodyItemsError(
            f"image {annotations[0].image_id if annotations else '?'} has no whole-body items"
        )
    shape = wholes[0].mask.shape
    for a in annotations:
        if a.mask.shape != shape:
            raise InvalidInputError(
                f"mask for {a.category} has shape {a.mask.shape}, expected {shape}"
            )

    nodes = [HierarchyNode(whole=w) for w in wholes]
    areas = [int(w.mask.sum()) for w in wholes]
    for part in parts:
        best = None  # (neg overlap is maximized via tuple ordering below)
        for i, w in enumerate(wholes):
            overlap = int(np.logical_and(part.mask, w.mask).sum())
            if overlap == 0:
                continue
            key = (-overlap, areas[i], w.category)
            if best is None or key < best[0]:
                best = (key, i)
        if best is None:
            log.debug("part %r overlaps no whole-body item; dropped", part.category)
            continue
        nodes[best[1]].parts.append(part)
    return nodes
