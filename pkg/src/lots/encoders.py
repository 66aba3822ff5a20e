"""Frozen sketch/text encoders, the tokenizer, and the trainable projections.

The encoders are deliberately small: random-initialized transformers that are
frozen after construction. Only the projection maps feeding the shared latent
space train. Any encoder honoring the token-count contracts can be swapped in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import torch
import torch.nn as nn

from .attention import TransformerBlock, init_transformer_params, sinusoidal_positions
from .errors import ConfigurationError, InvalidInputError
from .types import SketchImage

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

_SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>"]

_WORD_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

# Closed toy vocabulary: palette colors, garment taxonomy, caption glue words.
_DEFAULT_WORDS = """
a an the with and of in on model posing picture high-quality 4k photo style
subject background scenario metropolitan studio outdoor plain
red green blue yellow purple orange black white gray grey brown beige tan
khaki cream burgundy pink navy teal aqua olive maroon silver lime fuchsia
light dark pale deep bright
top shirt t-shirt blouse sweater cardigan jacket blazer coat vest dress
skirt pants trousers shorts jumpsuit cape hat cap glove sock shoe scarf
tie belt collar sleeve pocket neckline zipper button buckle hood lapel
epaulette ruffle rivet fringe bow flower applique bead sequin tassel
long short mini midi maxi loose tight fitted oversized symmetrical
asymmetrical single-breasted double-breasted v-neck round crew high low
above-the-hip above-the-knee below-the-knee normal waist length wrist
dotted striped checked check floral plaid graphic washed distressed plain
denim leather wool cotton silk lace fur knit velvet
bermuda skater circle a-line pencil wrap curved straight flared
set-in dropped-shoulder raglan puff sleeveless three-quarter
""".split()


@dataclass
class Tokenizer:
    """Word-level tokenizer: lowercase, split on whitespace/punctuation."""

    vocab: dict[str, int]
    max_len: int = 32
    pad_id: int = PAD_ID
    bos_id: int = BOS_ID
    eos_id: int = EOS_ID
    unk_id: int = UNK_ID
    _inverse: dict[int, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._inverse = {i: w for w, i in self.vocab.items()}

    @classmethod
    def from_words(cls, words: Iterable[str], max_len: int = 32) -> "Tokenizer":
        vocab: dict[str, int] = {}
        for w in list(_SPECIALS) + [w.lower() for w in words]:
            if w not in vocab:
                vocab[w] = len(vocab)
        return cls(vocab=vocab, max_len=max_len)

    @classmethod
    def default(cls, max_len: int = 32) -> "Tokenizer":
        return cls.from_words(_DEFAULT_WORDS, max_len=max_len)

    @classmethod
    def load(cls, path: str | Path, max_len: int = 32) -> "Tokenizer":
        """Vocabulary file: UTF-8, one token per line, line number = id."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(vocab={w: i for i, w in enumerate(lines)}, max_len=max_len)

    def save(self, path: str | Path) -> None:
        ordered = sorted(self.vocab.items(), key=lambda kv: kv[1])
        Path(path).write_text("\n".join(w for w, _ in ordered) + "\n", encoding="utf-8")

    def __len__(self) -> int:
        return len(self.vocab)

    def words(self, text: str) -> list[str]:
        return _WORD_RE.findall(text.lower())

    def encode(self, text: str) -> tuple[int, ...]:
        """Token ids for ``text``, at most ``max_len``; empty text encodes to [eos]."""
        ids = [self.vocab.get(w, self.unk_id) for w in self.words(text)]
        if not ids:
            return (self.eos_id,)
        return tuple(ids[: self.max_len])

    def decode(self, ids: Sequence[int]) -> str:
        specials = {self.pad_id, self.bos_id, self.eos_id}
        return " ".join(self._inverse.get(int(i), "<unk>") for i in ids if int(i) not in specials)

    def attention_mask(self, ids: Sequence[int]) -> torch.Tensor:
        """True where a position carries a real (non-pad) token."""
        return torch.tensor([int(i) != self.pad_id for i in ids], dtype=torch.bool)


@dataclass
class EncoderConfig:
    """Toy defaults: patch-16 sketch ViT and a 2-block text transformer."""

    sketch_patch: int = 16
    sketch_dim: int = 128
    sketch_blocks: int = 2
    text_dim: int = 128
    text_blocks: int = 2
    vocab_size: int = 2048
    heads: int = 4
    max_positions: int = 1024
    # positional tables are scaled to the embedding magnitude so content and
    # position compete fairly inside the frozen encoders
    pos_scale: float = 0.02
    seed: int = 0


class SketchEncoder(nn.Module):
    """Patchify, linearly embed, run transformer blocks; one token per patch."""

    def __init__(self, cfg: EncoderConfig, generator: torch.Generator):
        super().__init__()
        self.patch = cfg.sketch_patch
        self.dim = cfg.sketch_dim
        self.embed = nn.Linear(cfg.sketch_patch * cfg.sketch_patch, cfg.sketch_dim)
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.sketch_dim, cfg.heads) for _ in range(cfg.sketch_blocks)
        )
        self.final_norm = nn.LayerNorm(cfg.sketch_dim)
        self.register_buffer(
            "positions",
            sinusoidal_positions(cfg.max_positions, cfg.sketch_dim) * cfg.pos_scale,
            persistent=False,
        )
        init_transformer_params(self, generator)

    def token_count(self, height: int, width: int) -> int:
        return (height // self.patch) * (width // self.patch)

    def forward(self, pixels: torch.Tensor) -> torch.Tensor:
        """Encode one sketch (H, W) to (n_s, dim)."""
        h, w = pixels.shape
        p = self.patch
        if h % p != 0 or w % p != 0:
            raise InvalidInputError(f"sketch dims {h}x{w} not divisible by patch size {p}")
        patches = pixels.view(h // p, p, w // p, p).permute(0, 2, 1, 3).reshape(-1, p * p)
        x = self.embed(patches)
        x = x + self.positions[: x.shape[0]].to(x.dtype)
        for block in self.blocks:
            x = block(x)
        return self.final_norm(x)


class TextEncoder(nn.Module):
    """Token embedding plus positional encoding, then transformer blocks."""

    def __init__(self, cfg: EncoderConfig, generator: torch.Generator):
        super().__init__()
        self.dim = cfg.text_dim
        self.vocab_size = cfg.vocab_size
        self.embed = nn.Embedding(cfg.vocab_size, cfg.text_dim)
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.text_dim, cfg.heads) for _ in range(cfg.text_blocks)
        )
        self.final_norm = nn.LayerNorm(cfg.text_dim)
        self.register_buffer(
            "positions",
            sinusoidal_positions(cfg.max_positions, cfg.text_dim) * cfg.pos_scale,
            persistent=False,
        )
        init_transformer_params(self, generator)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Encode a 1-D id sequence to (n_t, dim)."""
        if ids.ndim != 1 or ids.numel() == 0:
            raise InvalidInputError("text encoder expects a non-empty 1-D id sequence")
        if int(ids.max()) >= self.vocab_size or int(ids.min()) < 0:
            raise InvalidInputError(
                f"token id out of vocabulary range [0, {self.vocab_size})"
            )
        x = self.embed(ids) + self.positions[: ids.shape[0]].to(self.embed.weight.dtype)
        for block in self.blocks:
            x = block(x)
        return self.final_norm(x)


class Projections(nn.Module):
    """Trainable maps W_S / W_T from encoder spaces into the shared latent space."""

    def __init__(self, sketch_dim: int, text_dim: int, latent_dim: int,
                 generator: torch.Generator):
        super().__init__()
        self.W_S = nn.Parameter(torch.empty(latent_dim, sketch_dim))
        self.W_T = nn.Parameter(torch.empty(latent_dim, text_dim))
        with torch.no_grad():
            self.W_S.normal_(0.0, 0.02, generator=generator)
            self.W_T.normal_(0.0, 0.02, generator=generator)

    def sketch(self, tokens: torch.Tensor) -> torch.Tensor:
        return tokens @ self.W_S.T

    def text(self, tokens: torch.Tensor) -> torch.Tensor:
        return tokens @ self.W_T.T


class EncoderBundle(nn.Module):
    """Frozen modality encoders plus their trainable projections.

    ``frozen=True`` freezes the encoders only; W_S / W_T always train.
    """

    def __init__(self, cfg: EncoderConfig, latent_dim: int, frozen: bool = True,
                 tokenizer: Tokenizer | None = None):
        super().__init__()
        gen = torch.Generator().manual_seed(cfg.seed)
        self.cfg = cfg
        self.latent_dim = latent_dim
        self.sketch_encoder = SketchEncoder(cfg, gen)
        self.text_encoder = TextEncoder(cfg, gen)
        self.proj = Projections(cfg.sketch_dim, cfg.text_dim, latent_dim, gen)
        self.tokenizer = tokenizer or Tokenizer.default()
        if len(self.tokenizer) > cfg.vocab_size:
            raise ConfigurationError(
                f"tokenizer vocabulary {len(self.tokenizer)} exceeds encoder table {cfg.vocab_size}"
            )
        self.frozen = frozen
        # raw-token memo for frozen encoders; keyed by input content
        self._token_cache: dict | None = None
        if frozen:
            self.freeze_encoders()

    def freeze_encoders(self) -> None:
        for p in self.sketch_encoder.parameters():
            p.requires_grad_(False)
        for p in self.text_encoder.parameters():
            p.requires_grad_(False)
        self.frozen = True

    def encoder_parameters(self):
        yield from self.sketch_encoder.parameters()
        yield from self.text_encoder.parameters()

    def enable_token_cache(self) -> None:
        """Memoize raw encoder outputs; only valid while the encoders stay
        frozen (they do not train, so cached tokens never go stale)."""
        if not self.frozen:
            raise ConfigurationError("token cache requires frozen encoders")
        self._token_cache = {}

    def _pixels(self, sketch: SketchImage) -> torch.Tensor:
        return torch.from_numpy(sketch.pixels).to(self.proj.W_S.dtype)

    def sketch_tokens(self, sketch: SketchImage) -> torch.Tensor:
        """Raw frozen-encoder tokens for a sketch, shape (n_s, sketch_dim)."""
        if self._token_cache is not None:
            import hashlib

            key = ("s", hashlib.blake2b(sketch.pixels.tobytes(), digest_size=16).digest(),
                   sketch.shape)
            hit = self._token_cache.get(key)
            if hit is not None:
                return hit
            with torch.no_grad():
                out = self.sketch_encoder(self._pixels(sketch))
            self._token_cache[key] = out
            return out
        with torch.no_grad() if self.frozen else torch.enable_grad():
            return self.sketch_encoder(self._pixels(sketch))

    def text_tokens(self, ids: Sequence[int]) -> torch.Tensor:
        """Raw frozen-encoder tokens for token ids, shape (n_t, text_dim)."""
        if self._token_cache is not None:
            key = ("t", tuple(int(i) for i in ids))
            hit = self._token_cache.get(key)
            if hit is not None:
                return hit
            with torch.no_grad():
                out = self.text_encoder(torch.as_tensor(list(ids), dtype=torch.long))
            self._token_cache[key] = out
            return out
        tens = torch.as_tensor(list(ids), dtype=torch.long)
        with torch.no_grad() if self.frozen else torch.enable_grad():
            return self.text_encoder(tens)

    def encode_global_context(self, ids: Sequence[int]) -> torch.Tensor:
        """Embedding of the global context description; feeds the base
        cross-attention, not the adapters, so it stays in encoder space."""
        return self.text_tokens(ids)
