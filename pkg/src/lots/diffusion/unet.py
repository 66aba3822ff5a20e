"""U-shaped denoiser with paired base/adapter cross-attention.

Every cross-attention site computes x' = w(x, text) + alpha * w_hat(x, P_ml)
on the same normalized feature input. Base sites exist from construction; the
adapter branch w_hat is attached afterwards and is attention-based, so it
accepts conditioning sequences of any length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn

from ..attention import FeedForward, MultiHeadAttention
from ..errors import ConfigurationError, InvalidInputError


@dataclass
class DenoiserConfig:
    image_size: int = 64
    in_channels: int = 3
    base_width: int = 64
    channel_mults: tuple[int, ...] = (1, 2, 4)
    blocks_per_level: int = 2
    attn_resolutions: tuple[int, ...] = (32, 16)
    heads: int = 4
    text_ctx_dim: int = 128
    cond_dim: int = 256
    # zero-init keeps a freshly attached adapter inert; fan-in init lets the
    # conditioning influence features from the first training step
    adapter_zero_init: bool = True
    # >1 sharpens initial adapter attention so outputs vary with the
    # conditioning content instead of collapsing to its uniform mean
    adapter_init_gain: float = 1.0
    seed: int = 0


def _groups(ch: int) -> int:
    for g in (8, 4, 2):
        if ch % g == 0:
            return g
    return 1


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of integer diffusion steps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    ).to(t.device)
    args = t.double().unsqueeze(1) * freqs.unsqueeze(0)
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=1)
    return emb


class ResBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int, temb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(ch_in), ch_in)
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, padding=1)
        self.temb_proj = nn.Linear(temb_dim, ch_out)
        self.norm2 = nn.GroupNorm(_groups(ch_out), ch_out)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, padding=1)
        self.skip = nn.Conv2d(ch_in, ch_out, 1) if ch_in != ch_out else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(torch.nn.functional.silu(self.norm1(x)))
        h = h + self.temb_proj(torch.nn.functional.silu(temb))[:, :, None, None]
        h = self.conv2(torch.nn.functional.silu(self.norm2(h)))
        return h + self.skip(x)


class AdapterAttention(nn.Module):
    """The parallel cross-attention branch w_hat, independent of the base w."""

    def __init__(self, dim: int, heads: int, cond_dim: int, generator: torch.Generator,
                 zero_init: bool = True, init_gain: float = 1.0):
        super().__init__()
        self.attn = MultiHeadAttention(dim, heads, context_dim=cond_dim)
        with torch.no_grad():
            self.attn.to_q.weight.normal_(0.0, init_gain * dim ** -0.5, generator=generator)
            self.attn.to_k.weight.normal_(0.0, init_gain * cond_dim ** -0.5, generator=generator)
            self.attn.to_v.weight.normal_(0.0, cond_dim ** -0.5, generator=generator)
            if zero_init:
                self.attn.to_out.weight.zero_()
            else:
                self.attn.to_out.weight.normal_(0.0, dim ** -0.5, generator=generator)

    def forward(self, x: torch.Tensor, cond: torch.Tensor,
                key_mask: torch.Tensor | None = None) -> torch.Tensor:
        return self.attn(x, context=cond, key_mask=key_mask)


class AttnSite(nn.Module):
    """Self-attention, paired cross-attention, and feed-forward on a feature map.

    The cross position is the pairing point: base output plus alpha-scaled
    adapter output, both fed the same normalized input. A learned positional
    table over the flattened grid lets tokens form location-aware queries;
    convolution alone gives this network too little absolute position to
    route localized conditioning.
    """

    def __init__(self, ch: int, heads: int, text_ctx_dim: int, tokens: int = 0):
        super().__init__()
        self.norm_in = nn.GroupNorm(_groups(ch), ch)
        self.proj_in = nn.Conv2d(ch, ch, 1)
        self.pos_embed = nn.Parameter(torch.randn(tokens, ch) * 0.02) if tokens else None
        self.norm_self = nn.LayerNorm(ch)
        self.self_attn = MultiHeadAttention(ch, heads)
        self.norm_cross = nn.LayerNorm(ch)
        self.base_cross = MultiHeadAttention(ch, heads, context_dim=text_ctx_dim)
        self.adapter: AdapterAttention | None = None
        self.norm_ff = nn.LayerNorm(ch)
        self.ff = FeedForward(ch, 2)
        self.proj_out = nn.Conv2d(ch, ch, 1)

    def cross_pair(self, tokens: torch.Tensor, text_ctx: torch.Tensor,
                   cond: torch.Tensor | None, alpha: float,
                   text_mask: torch.Tensor | None = None,
                   cond_mask: torch.Tensor | None = None) -> torch.Tensor:
        """tokens + w(norm(tokens), text) + alpha * w_hat(norm(tokens), cond)."""
        h = self.norm_cross(tokens)
        out = self.base_cross(h, context=text_ctx, key_mask=text_mask)
        if self.adapter is not None and alpha != 0.0 and cond is not None:
            out = out + alpha * self.adapter(h, cond, key_mask=cond_mask)
        return tokens + out

    def forward(self, x: torch.Tensor, text_ctx: torch.Tensor,
                cond: torch.Tensor | None, alpha: float,
                text_mask: torch.Tensor | None = None,
                cond_mask: torch.Tensor | None = None) -> torch.Tensor:
        b, c, h, w = x.shape
        residual = x
        tokens = self.proj_in(self.norm_in(x)).permute(0, 2, 3, 1).reshape(b, h * w, c)
        if self.pos_embed is not None and self.pos_embed.shape[0] == h * w:
            tokens = tokens + self.pos_embed.to(tokens.dtype)
        tokens = tokens + self.self_attn(self.norm_self(tokens))
        tokens = self.cross_pair(tokens, text_ctx, cond, alpha, text_mask, cond_mask)
        tokens = tokens + self.ff(self.norm_ff(tokens))
        out = tokens.reshape(b, h, w, c).permute(0, 3, 1, 2)
        return residual + self.proj_out(out)


class Downsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.op = nn.Conv2d(ch, ch, 3, stride=2, padding=1)

    def forward(self, x):
        return self.op(x)


class Upsample(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x):
        return self.conv(torch.nn.functional.interpolate(x, scale_factor=2, mode="nearest"))


class Denoiser(nn.Module):
    """Noise predictor over images, conditioned on global text at base sites
    and on the multi-level pair tokens at adapter sites."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        w = cfg.base_width
        temb_dim = w * 4
        self.time_mlp = nn.Sequential(nn.Linear(w, temb_dim), nn.SiLU(), nn.Linear(temb_dim, temb_dim))
        self.stem = nn.Conv2d(cfg.in_channels, w, 3, padding=1)

        self.down_blocks = nn.ModuleList()
        self.down_attns = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        res = cfg.image_size
        ch = w
        skip_channels = [ch]
        for li, mult in enumerate(cfg.channel_mults):
            ch_out = w * mult
            blocks = nn.ModuleList()
            attns = nn.ModuleList()
            for _ in range(cfg.blocks_per_level):
                blocks.append(ResBlock(ch, ch_out, temb_dim))
                ch = ch_out
                attns.append(self._maybe_attn(res, ch))
                skip_channels.append(ch)
            self.down_blocks.append(blocks)
            self.down_attns.append(attns)
            if li != len(cfg.channel_mults) - 1:
                self.downsamplers.append(Downsample(ch))
                res //= 2
                skip_channels.append(ch)
            else:
                self.downsamplers.append(nn.Identity())

        self.mid_block1 = ResBlock(ch, ch, temb_dim)
        self.mid_attn = AttnSite(ch, cfg.heads, cfg.text_ctx_dim, tokens=res * res)
        self.mid_block2 = ResBlock(ch, ch, temb_dim)

        self.up_blocks = nn.ModuleList()
        self.up_attns = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        for li, mult in reversed(list(enumerate(cfg.channel_mults))):
            ch_out = w * mult
            blocks = nn.ModuleList()
            attns = nn.ModuleList()
            for _ in range(cfg.blocks_per_level + 1):
                blocks.append(ResBlock(ch + skip_channels.pop(), ch_out, temb_dim))
                ch = ch_out
                attns.append(self._maybe_attn(res, ch))
            self.up_blocks.append(blocks)
            self.up_attns.append(attns)
            if li != 0:
                self.upsamplers.append(Upsample(ch))
                res *= 2
            else:
                self.upsamplers.append(nn.Identity())

        self.out_norm = nn.GroupNorm(_groups(ch), ch)
        self.out_conv = nn.Conv2d(ch, cfg.in_channels, 3, padding=1)
        with torch.no_grad():
            self.out_conv.weight.zero_()
            self.out_conv.bias.zero_()

    def _maybe_attn(self, res: int, ch: int) -> nn.Module:
        if res in self.cfg.attn_resolutions:
            return AttnSite(ch, self.cfg.heads, self.cfg.text_ctx_dim, tokens=res * res)
        return nn.Identity()

    def attention_sites(self) -> list[AttnSite]:
        return [m for m in self.modules() if isinstance(m, AttnSite)]

    @property
    def has_adapters(self) -> bool:
        return any(site.adapter is not None for site in self.attention_sites())

    def forward(self, x: torch.Tensor, t: torch.Tensor, text_ctx: torch.Tensor,
                cond: torch.Tensor | None = None, alpha: float = 1.0,
                text_mask: torch.Tensor | None = None,
                cond_mask: torch.Tensor | None = None) -> torch.Tensor:
        if x.shape[1] != self.cfg.in_channels:
            raise InvalidInputError(f"expected {self.cfg.in_channels} channels, got {x.shape[1]}")
        temb = self.time_mlp(timestep_embedding(t, self.cfg.base_width).to(x.dtype))

        def run_attn(site: nn.Module, h: torch.Tensor) -> torch.Tensor:
            if isinstance(site, AttnSite):
                return site(h, text_ctx, cond, alpha, text_mask, cond_mask)
            return h

        h = self.stem(x)
        skips = [h]
        for li in range(len(self.cfg.channel_mults)):
            for block, attn in zip(self.down_blocks[li], self.down_attns[li]):
                h = block(h, temb)
                h = run_attn(attn, h)
                skips.append(h)
            if not isinstance(self.downsamplers[li], nn.Identity):
                h = self.downsamplers[li](h)
                skips.append(h)

        h = self.mid_block1(h, temb)
        h = run_attn(self.mid_attn, h)
        h = self.mid_block2(h, temb)

        for ui in range(len(self.cfg.channel_mults)):
            for block, attn in zip(self.up_blocks[ui], self.up_attns[ui]):
                h = block(torch.cat([h, skips.pop()], dim=1), temb)
                h = run_attn(attn, h)
            if not isinstance(self.upsamplers[ui], nn.Identity):
                h = self.upsamplers[ui](h)

        return self.out_conv(torch.nn.functional.silu(self.out_norm(h)))


def attach_adapters(denoiser: Denoiser, seed: int | None = None) -> Denoiser:
    """Insert one parallel adapter branch beside every base cross-attention."""
    gen = torch.Generator().manual_seed(denoiser.cfg.seed + 7 if seed is None else seed)
    for site in denoiser.attention_sites():
        site.adapter = AdapterAttention(
            site.base_cross.dim, denoiser.cfg.heads, denoiser.cfg.cond_dim, gen,
            zero_init=denoiser.cfg.adapter_zero_init,
            init_gain=denoiser.cfg.adapter_init_gain,
        )
    return denoiser


def build_denoiser(cfg: DenoiserConfig, with_adapters: bool = True) -> Denoiser:
    gen_state = torch.random.get_rng_state()
    torch.manual_seed(cfg.seed)
    try:
        model = Denoiser(cfg)
    finally:
        torch.random.set_rng_state(gen_state)
    if with_adapters:
        attach_adapters(model)
    return model
