"""Conditioning data model: sketches, localized pairs, and fused token sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError


class Variant(str, Enum):
    """Strategy used to combine pair tokens with the global sketch tokens."""

    LOTS = "lots"
    CONCAT = "concat"
    ATTN = "attn"
    POOL = "pool"


@dataclass(frozen=True)
class SketchImage:
    """Single-channel sketch, intensities in [0, 1] with 1.0 = white background.

    Strokes are dark, so composing sketches is a pixelwise minimum.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 2 or px.shape[0] <= 0 or px.shape[1] <= 0:
            raise InvalidInputError(f"sketch must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.isfinite(px).all():
            raise InvalidInputError("sketch contains non-finite values")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InvalidInputError("sketch intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def is_blank(self) -> bool:
        return bool(np.all(self.pixels == 1.0))

    @staticmethod
    def blank(height: int, width: int) -> "SketchImage":
        return SketchImage(np.ones((height, width), dtype=np.float32))


@dataclass(frozen=True)
class LocalizedPair:
    """One sketch-text conditioning unit describing a single garment region."""

    sketch: SketchImage
    text: str
    token_ids: tuple[int, ...]
    garment_category: str = ""
    region_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.token_ids) == 0:
            raise InvalidInputError("localized pair requires a non-empty token sequence")
        object.__setattr__(self, "token_ids", tuple(int(t) for t in self.token_ids))
        if self.region_mask is not None:
            mask = np.asarray(self.region_mask, dtype=bool)
            if mask.shape != self.sketch.shape:
                raise InvalidInputError(
                    f"region mask shape {mask.shape} does not match sketch {self.sketch.shape}"
                )
            object.__setattr__(self, "region_mask", mask)


@dataclass(frozen=True)
class ConditioningSet:
    """N localized pairs plus the whole-outfit sketch and global context text."""

    pairs: tuple[LocalizedPair, ...]
    global_sketch: SketchImage
    global_context: str
    global_context_ids: tuple[int, ...]
    dropped: bool = False

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if len(pairs) == 0:
            raise InvalidInputError("a conditioning set needs at least one localized pair")
        shape = pairs[0].sketch.shape
        for i, p in enumerate(pairs):
            if p.sketch.shape != shape:
                raise InvalidInputError(f"pair {i} sketch shape {p.sketch.shape} != {shape}")
        if self.global_sketch.shape != shape:
            raise InvalidInputError(
                f"global sketch shape {self.global_sketch.shape} != pair shape {shape}"
            )
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(
            self, "global_context_ids", tuple(int(t) for t in self.global_context_ids)
        )

    @property
    def num_pairs(self) -> int:
        return len(self.pairs)


@dataclass
class PairEmbedding:
    """Projected per-pair encoder outputs: sketch rows h_S and text rows h_T."""

    h_sketch: "object"  # torch.Tensor (n_s, d)
    h_text: "object"  # torch.Tensor (n_t, d)


@dataclass
class PairTokens:
    """k pooled tokens for one localized pair."""

    tokens: "object"  # torch.Tensor (k, d)
    pair_index: int


@dataclass
class MultiLevelTokens:
    """Fused conditioning sequence handed to the diffusion adapters."""

    tokens: "object"  # torch.Tensor (rows, d)
    pair_boundaries: tuple[int, ...] = field(default_factory=tuple)
    variant: Variant = Variant.LOTS

    @property
    def rows(self) -> int:
        return int(self.tokens.shape[0])


def expected_rows(variant: Variant, n_pairs: int, k: int, n_global: int) -> int:
    """Row-count law for each fusion variant."""
    if variant in (Variant.LOTS, Variant.ATTN):
        return n_pairs * k
    if variant == Variant.CONCAT:
        return n_pairs * k + n_global
    if variant == Variant.POOL:
        return k
    raise InvalidInputError(f"unsupported variant: {variant}")


def pair_boundaries(n_pairs: int, k: int) -> tuple[int, ...]:
    """Offsets delimiting each pair's k-token block in the concatenated sequence."""
    return tuple(i * k for i in range(n_pairs + 1))


def validate_pairs_shape(sketches: Sequence[np.ndarray]) -> tuple[int, int]:
    shapes = {s.shape for s in sketches}
    if len(shapes) != 1:
        raise InvalidInputError(f"sketches disagree on dimensions: {sorted(shapes)}")
    return next(iter(shapes))
