"""Full generative model: encoders, conditioning stage, and guided denoiser."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import torch
import torch.nn as nn

from ..conditioning import ConditioningConfig, ConditioningStage
from ..encoders import EncoderBundle, EncoderConfig, Tokenizer
from ..errors import ConfigurationError
from ..types import ConditioningSet, Variant
from .schedule import NoiseSchedule
from .unet import Denoiser, DenoiserConfig, build_denoiser

EMPTY_PROMPT = ""


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    conditioning: ConditioningConfig = field(default_factory=ConditioningConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    timesteps: int = 1000
    schedule: str = "cosine"
    variant: Variant = Variant.LOTS

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.denoiser.cond_dim != self.conditioning.latent_dim:
            raise ConfigurationError("adapter conditioning dim != latent dim")
        if self.denoiser.text_ctx_dim != self.encoder.text_dim:
            raise ConfigurationError("base cross-attention dim != text encoder dim")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        enc = EncoderConfig(**d["encoder"])
        cond = ConditioningConfig(**d["conditioning"])
        den = d["denoiser"].copy()
        den["channel_mults"] = tuple(den["channel_mults"])
        den["attn_resolutions"] = tuple(den["attn_resolutions"])
        return cls(
            encoder=enc,
            conditioning=cond,
            denoiser=DenoiserConfig(**den),
            timesteps=d["timesteps"],
            schedule=d["schedule"],
            variant=Variant(d["variant"]),
        )

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Small configuration for fast CPU experiments."""
        base = dict(
            encoder=EncoderConfig(sketch_dim=64, text_dim=64, sketch_blocks=1, text_blocks=1),
            conditioning=ConditioningConfig(latent_dim=64, pool_tokens=8),
            denoiser=DenoiserConfig(
                base_width=32, blocks_per_level=1, text_ctx_dim=64, cond_dim=64
            ),
            timesteps=400,
        )
        base.update(overrides)
        return cls(**base)


def make_schedule(cfg: ModelConfig) -> NoiseSchedule:
    if cfg.schedule == "cosine":
        return NoiseSchedule.cosine(cfg.timesteps)
    if cfg.schedule == "linear":
        return NoiseSchedule.linear(cfg.timesteps)
    raise ConfigurationError(f"unknown schedule: {cfg.schedule}")


class LotsModel(nn.Module):
    """Ties the conditioning stage to the denoiser and owns the null block."""

    def __init__(self, config: ModelConfig, tokenizer: Tokenizer | None = None):
        super().__init__()
        self.config = config
        self.encoders = EncoderBundle(
            config.encoder, latent_dim=config.conditioning.latent_dim, tokenizer=tokenizer
        )
        self.stage = ConditioningStage(config.conditioning, self.encoders)
        self.denoiser: Denoiser = build_denoiser(config.denoiser, with_adapters=True)
        gen = torch.Generator().manual_seed(config.conditioning.seed + 2)
        self.null_cond = nn.Parameter(
            torch.empty(config.conditioning.pool_tokens, config.conditioning.latent_dim)
        )
        with torch.no_grad():
            self.null_cond.normal_(0.0, 0.02, generator=gen)
        self.schedule = make_schedule(config)

    @property
    def tokenizer(self) -> Tokenizer:
        return self.encoders.tokenizer

    @property
    def image_size(self) -> int:
        return self.config.denoiser.image_size

    def empty_prompt_tokens(self) -> torch.Tensor:
        ids = self.tokenizer.encode(EMPTY_PROMPT)
        return self.encoders.encode_global_context(ids)

    def prepare_conditioning(
        self, sets: Sequence[ConditioningSet], variant: Variant | None = None
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """Compose each set and pad across the batch.

        Returns (cond, cond_mask, text_ctx, text_mask). Dropped sets use the
        learned null block and the empty prompt. Padded rows are masked out of
        the adapter key/value set.
        """
        variant = Variant(variant or self.config.variant)
        cond_rows, text_rows = [], []
        for cs in sets:
            if cs.dropped:
                cond_rows.append(self.null_cond)
                text_rows.append(self.empty_prompt_tokens())
            else:
                cond_rows.append(self.stage.compose(cs, variant).tokens)
                text_rows.append(self.encoders.encode_global_context(cs.global_context_ids))
        cond, cond_mask = _pad_stack(cond_rows)
        text, text_mask = _pad_stack(text_rows)
        return cond, cond_mask, text, text_mask

    def predict_noise(self, x_t: torch.Tensor, t: torch.Tensor,
                      sets: Sequence[ConditioningSet], alpha: float = 1.0,
                      variant: Variant | None = None) -> torch.Tensor:
        cond, cond_mask, text, text_mask = self.prepare_conditioning(sets, variant)
        dtype = x_t.dtype
        return self.denoiser(
            x_t, t, text.to(dtype), cond.to(dtype), alpha,
            text_mask=text_mask, cond_mask=cond_mask,
        )

    def frozen_parameters(self) -> Iterable[nn.Parameter]:
        yield from self.encoders.encoder_parameters()

    def base_denoiser_parameters(self) -> Iterable[nn.Parameter]:
        adapter_ids = {id(p) for s in self.denoiser.attention_sites()
                       if s.adapter is not None for p in s.adapter.parameters()}
        for p in self.denoiser.parameters():
            if id(p) not in adapter_ids:
                yield p

    def adapter_parameters(self) -> Iterable[nn.Parameter]:
        for s in self.denoiser.attention_sites():
            if s.adapter is not None:
                yield from s.adapter.parameters()

    def trainable_parameters(self, freeze_base: bool = False) -> list[nn.Parameter]:
        """Projections, Pair-Former, global conditioning, adapters, null block;
        plus the base denoiser unless it is frozen. Encoders never train."""
        params: list[nn.Parameter] = [self.encoders.proj.W_S, self.encoders.proj.W_T]
        params += list(self.stage.pair_former.parameters())
        params += list(self.stage.global_cond.parameters())
        params += list(self.adapter_parameters())
        params.append(self.null_cond)
        if not freeze_base:
            params += list(self.base_denoiser_parameters())
        return params


def _pad_stack(rows: list[torch.Tensor]) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack variable-length (n_i, d) tensors into (B, max_n, d) plus mask."""
    max_n = max(r.shape[0] for r in rows)
    d = rows[0].shape[1]
    out = rows[0].new_zeros(len(rows), max_n, d)
    mask = torch.zeros(len(rows), max_n, dtype=torch.bool)
    for i, r in enumerate(rows):
        out[i, : r.shape[0]] = r
        mask[i, : r.shape[0]] = True
    return out, mask
