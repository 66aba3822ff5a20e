"""Attention primitives shared by the conditioning stack and the denoiser."""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from .errors import ConfigurationError


def scaled_dot_product(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
                       key_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Plain attention over the last two axes; q/k/v are (..., rows, head_dim).

    ``key_mask`` is boolean (..., kv_rows); False positions are excluded.
    """
    scale = 1.0 / math.sqrt(q.shape[-1])
    logits = torch.matmul(q, k.transpose(-2, -1)) * scale
    if key_mask is not None:
        logits = logits.masked_fill(~key_mask.unsqueeze(-2), float("-inf"))
    weights = torch.softmax(logits, dim=-1)
    return torch.matmul(weights, v)


class MultiHeadAttention(nn.Module):
    """Multi-head attention map without residual or normalization.

    Computes out_proj(softmax(Q K^T / sqrt(d_h)) V). Queries come from ``x``,
    keys/values from ``context`` (defaults to ``x`` for self-attention).
    """

    def __init__(self, dim: int, heads: int = 4, context_dim: int | None = None,
                 bias: bool = False):
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError(f"dim {dim} not divisible by heads {heads}")
        context_dim = dim if context_dim is None else context_dim
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.to_q = nn.Linear(dim, dim, bias=bias)
        self.to_k = nn.Linear(context_dim, dim, bias=bias)
        self.to_v = nn.Linear(context_dim, dim, bias=bias)
        self.to_out = nn.Linear(dim, dim, bias=bias)

    def forward(self, x: torch.Tensor, context: torch.Tensor | None = None,
                key_mask: torch.Tensor | None = None) -> torch.Tensor:
        context = x if context is None else context
        squeeze = x.ndim == 2
        if squeeze:
            x = x.unsqueeze(0)
            context = context.unsqueeze(0)
            if key_mask is not None:
                key_mask = key_mask.unsqueeze(0)
        b, n, _ = x.shape
        m = context.shape[1]
        q = self.to_q(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        k = self.to_k(context).view(b, m, self.heads, self.head_dim).transpose(1, 2)
        v = self.to_v(context).view(b, m, self.heads, self.head_dim).transpose(1, 2)
        mask = key_mask.unsqueeze(1) if key_mask is not None else None
        out = scaled_dot_product(q, k, v, mask)
        out = out.transpose(1, 2).reshape(b, n, self.dim)
        out = self.to_out(out)
        return out.squeeze(0) if squeeze else out


class FeedForward(nn.Module):
    """Position-wise MLP, GELU, hidden width ``mult * dim``."""

    def __init__(self, dim: int, mult: int = 4):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, mult * dim),
            nn.GELU(),
            nn.Linear(mult * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class TransformerBlock(nn.Module):
    """Pre-norm self-attention block with a feed-forward sublayer."""

    def __init__(self, dim: int, heads: int = 4, ff_mult: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = FeedForward(dim, ff_mult)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor | None = None) -> torch.Tensor:
        x = x + self.attn(self.norm1(x), key_mask=key_mask)
        x = x + self.ff(self.norm2(x))
        return x


def sinusoidal_positions(n: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Fixed sin/cos position table of shape (n, dim)."""
    position = torch.arange(n, dtype=torch.float64).unsqueeze(1)
    half = dim // 2
    freq = torch.exp(torch.arange(half, dtype=torch.float64) * (-math.log(10000.0) / max(half - 1, 1)))
    angles = position * freq
    table = torch.zeros(n, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angles)
    table[:, 1::2] = torch.cos(angles[:, : dim - half])
    return table.to(dtype)


def init_transformer_params(module: nn.Module, generator: torch.Generator, std: float = 0.02) -> None:
    """Gaussian init for matrices, zeros for biases; norm scales stay at one."""
    for name, p in module.named_parameters():
        if p.ndim >= 2:
            with torch.no_grad():
                p.normal_(0.0, std, generator=generator)
        elif name.endswith("bias"):
            with torch.no_grad():
                p.zero_()
