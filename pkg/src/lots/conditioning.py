"""Multi-level conditioning stage.

Every localized sketch-text pair is encoded and pooled independently, the
whole-outfit sketch is injected by cross-attention over the concatenated pair
tokens, and the two levels are fused by addition into the sequence consumed by
the diffusion adapters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import FeedForward, MultiHeadAttention, init_transformer_params
from .encoders import EncoderBundle
from .errors import ConfigurationError, InvalidInputError
from .types import (
    ConditioningSet,
    LocalizedPair,
    MultiLevelTokens,
    PairEmbedding,
    PairTokens,
    SketchImage,
    Variant,
    pair_boundaries,
)


@dataclass
class ConditioningConfig:
    latent_dim: int = 256
    pool_tokens: int = 32  # k
    pair_former_depth: int = 1
    pair_former_heads: int = 4
    pair_former_feed_forward: bool = True
    pair_former_pre_norm: bool = True
    pair_former_residual: bool = True
    global_heads: int = 1
    seed: int = 0


class PairFormerLayer(nn.Module):
    def __init__(self, dim: int, heads: int, feed_forward: bool, pre_norm: bool,
                 residual: bool):
        super().__init__()
        self.pre_norm = pre_norm
        self.residual = residual
        self.norm1 = nn.LayerNorm(dim) if pre_norm else nn.Identity()
        self.attn = MultiHeadAttention(dim, heads)
        self.has_ff = feed_forward
        if feed_forward:
            self.norm2 = nn.LayerNorm(dim) if pre_norm else nn.Identity()
            self.ff = FeedForward(dim, 4)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        a = self.attn(self.norm1(x))
        x = x + a if self.residual else a
        if self.has_ff:
            f = self.ff(self.norm2(x))
            x = x + f if self.residual else f
        return x


class PairFormer(nn.Module):
    """Pools one pair's sketch+text tokens into k learnable-token outputs.

    Self-attention runs over [z; h_S; h_T] and the first k rows are kept.
    The token bank z is shared across pairs; each pair is processed alone.
    """

    def __init__(self, cfg: ConditioningConfig, generator: torch.Generator):
        super().__init__()
        d, k = cfg.latent_dim, cfg.pool_tokens
        if k < 1:
            raise ConfigurationError("pool token count k must be >= 1")
        self.k = k
        self.dim = d
        self.z = nn.Parameter(torch.empty(k, d))
        self.layers = nn.ModuleList(
            PairFormerLayer(
                d,
                cfg.pair_former_heads,
                cfg.pair_former_feed_forward,
                cfg.pair_former_pre_norm,
                cfg.pair_former_residual,
            )
            for _ in range(cfg.pair_former_depth)
        )
        # pre-norm stacks need a closing norm; plain (post-norm) mode stays bare
        self.final_norm = nn.LayerNorm(d) if cfg.pair_former_pre_norm else nn.Identity()
        init_transformer_params(self, generator)
        with torch.no_grad():
            self.z.normal_(0.0, 0.02, generator=generator)

    def forward(self, emb: PairEmbedding) -> torch.Tensor:
        h_s, h_t = emb.h_sketch, emb.h_text
        if h_s.shape[-1] != self.dim or h_t.shape[-1] != self.dim:
            raise ConfigurationError(
                f"pair embedding dim ({h_s.shape[-1]},{h_t.shape[-1]}) != token bank dim {self.dim}"
            )
        if not (torch.isfinite(h_s).all() and torch.isfinite(h_t).all()):
            raise InvalidInputError("pair embedding contains non-finite values")
        x = torch.cat([self.z.to(h_s.dtype), h_s, h_t], dim=0)
        for layer in self.layers:
            x = layer(x)
        return self.final_norm(x[: self.k])


class GlobalConditioning(nn.Module):
    """Projects the whole-outfit sketch tokens and cross-attends them into the
    pair tokens. Q/K/V/out are plain d-to-d maps; W_g is independent of W_S."""

    def __init__(self, latent_dim: int, sketch_dim: int, heads: int,
                 generator: torch.Generator):
        super().__init__()
        if latent_dim % heads != 0:
            raise ConfigurationError(f"latent dim {latent_dim} not divisible by heads {heads}")
        self.dim = latent_dim
        self.heads = heads
        self.W_g = nn.Parameter(torch.empty(latent_dim, sketch_dim))
        self.Q = nn.Parameter(torch.empty(latent_dim, latent_dim))
        self.K = nn.Parameter(torch.empty(latent_dim, latent_dim))
        self.V = nn.Parameter(torch.empty(latent_dim, latent_dim))
        self.out = nn.Parameter(torch.empty(latent_dim, latent_dim))
        gen = generator
        with torch.no_grad():
            for p in (self.W_g, self.Q, self.K, self.V, self.out):
                p.normal_(0.0, 0.02, generator=gen)

    def project(self, sketch_tokens: torch.Tensor) -> torch.Tensor:
        """h_g = W_g applied to raw sketch-encoder tokens."""
        if sketch_tokens.shape[-1] != self.W_g.shape[1]:
            raise ConfigurationError(
                f"sketch token dim {sketch_tokens.shape[-1]} != W_g input {self.W_g.shape[1]}"
            )
        return sketch_tokens @ self.W_g.T

    def condition(self, queries: torch.Tensor, keys_values: torch.Tensor) -> torch.Tensor:
        """Scaled dot-product cross-attention; each query row is independent."""
        if queries.shape[-1] != self.dim or keys_values.shape[-1] != self.dim:
            raise ConfigurationError("cross-attention inputs must live in the latent space")
        n, m = queries.shape[0], keys_values.shape[0]
        hd = self.dim // self.heads
        q = (queries @ self.Q.T).view(n, self.heads, hd).transpose(0, 1)
        k = (keys_values @ self.K.T).view(m, self.heads, hd).transpose(0, 1)
        v = (keys_values @ self.V.T).view(m, self.heads, hd).transpose(0, 1)
        weights = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(hd), dim=-1)
        fused = (weights @ v).transpose(0, 1).reshape(n, self.dim)
        return fused @ self.out.T


def encode_pair(pair: LocalizedPair, enc: EncoderBundle) -> PairEmbedding:
    """Encode one pair with the frozen encoders and project into latent space.

    Purely a function of this pair: no other pair can influence the result.
    """
    sketch_tokens = enc.sketch_tokens(pair.sketch)
    text_tokens = enc.text_tokens(pair.token_ids)
    if sketch_tokens.shape[-1] != enc.proj.W_S.shape[1]:
        raise ConfigurationError("sketch encoder output dim does not match W_S")
    if text_tokens.shape[-1] != enc.proj.W_T.shape[1]:
        raise ConfigurationError("text encoder output dim does not match W_T")
    return PairEmbedding(h_sketch=enc.proj.sketch(sketch_tokens),
                         h_text=enc.proj.text(text_tokens))


def pair_former(emb: PairEmbedding, params: PairFormer, pair_index: int = 0) -> PairTokens:
    return PairTokens(tokens=params(emb), pair_index=pair_index)


def encode_global_sketch(sketch: SketchImage, enc: EncoderBundle,
                         params: GlobalConditioning) -> torch.Tensor:
    """Whole-outfit sketch through the shared sketch encoder, then W_g."""
    return params.project(enc.sketch_tokens(sketch))


def global_condition(pair_tokens: torch.Tensor, global_tokens: torch.Tensor,
                     params: GlobalConditioning) -> torch.Tensor:
    """Queries from the pair tokens, keys/values from the global sketch tokens."""
    return params.condition(pair_tokens, global_tokens)


def fuse_multi_level(pair_tokens: torch.Tensor, globally_conditioned: torch.Tensor,
                     boundaries: tuple[int, ...] = (),
                     variant: Variant = Variant.LOTS) -> MultiLevelTokens:
    """Element-wise sum of the two levels; pair block boundaries carry over."""
    if pair_tokens.shape != globally_conditioned.shape:
        raise InvalidInputError(
            f"cannot fuse shapes {tuple(pair_tokens.shape)} and {tuple(globally_conditioned.shape)}"
        )
    return MultiLevelTokens(tokens=pair_tokens + globally_conditioned,
                            pair_boundaries=boundaries, variant=variant)


class ConditioningStage(nn.Module):
    """Owns the trainable conditioning parameters and runs the full stage."""

    def __init__(self, cfg: ConditioningConfig, encoders: EncoderBundle):
        super().__init__()
        if encoders.latent_dim != cfg.latent_dim:
            raise ConfigurationError("encoder bundle latent dim != conditioning latent dim")
        gen = torch.Generator().manual_seed(cfg.seed + 1)
        self.cfg = cfg
        self.encoders = encoders
        self.pair_former = PairFormer(cfg, gen)
        self.add_module(
            "global",
            GlobalConditioning(cfg.latent_dim, encoders.cfg.sketch_dim, cfg.global_heads, gen),
        )

    @property
    def global_cond(self) -> GlobalConditioning:
        return self._modules["global"]

    @property
    def k(self) -> int:
        return self.pair_former.k

    def pair_block(self, pair: LocalizedPair, index: int = 0) -> PairTokens:
        emb = encode_pair(pair, self.encoders)
        return pair_former(emb, self.pair_former, index)

    def concat_pairs(self, cs: ConditioningSet) -> torch.Tensor:
        blocks = [self.pair_block(p, i).tokens for i, p in enumerate(cs.pairs)]
        return torch.cat(blocks, dim=0)

    def compose(self, cs: ConditioningSet, variant: Variant = Variant.LOTS) -> MultiLevelTokens:
        """Full multi-level conditioning for one set under the chosen variant."""
        variant = Variant(variant)
        n = cs.num_pairs
        bounds = pair_boundaries(n, self.k)
        P = self.concat_pairs(cs)
        h_g = encode_global_sketch(cs.global_sketch, self.encoders, self.global_cond)

        if variant == Variant.LOTS:
            P_g = self.global_cond.condition(P, h_g)
            return fuse_multi_level(P, P_g, bounds, variant)
        if variant == Variant.CONCAT:
            tokens = torch.cat([P, h_g], dim=0)
            return MultiLevelTokens(tokens=tokens, pair_boundaries=bounds, variant=variant)
        if variant == Variant.ATTN:
            # Global tokens query the pairs; the n_g rows are mean-pooled and
            # broadcast so the result still adds onto P row-for-row.
            fused = self.global_cond.condition(h_g, P)
            return fuse_multi_level(P, fused.mean(dim=0, keepdim=True).expand_as(P), bounds, variant)
        if variant == Variant.POOL:
            pooled = P.view(n, self.k, -1).mean(dim=0)
            P_g = self.global_cond.condition(pooled, h_g)
            fused = fuse_multi_level(pooled, P_g, pair_boundaries(1, self.k), variant)
            return fused
        raise InvalidInputError(f"unsupported variant: {variant}")


def compose_conditioning(cs: ConditioningSet, stage: ConditioningStage,
                         variant: Variant = Variant.LOTS) -> MultiLevelTokens:
    return stage.compose(cs, variant)
