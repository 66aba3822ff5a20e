"""Forward-process noise schedule."""

from __future__ import annotations

import math

import numpy as np
import torch

from ..errors import InvalidInputError


class NoiseSchedule:
    """Discrete schedule over T steps; t runs 1..T.

    Stores per-step beta_t, alpha_t = 1 - beta_t, and the cumulative product
    alpha_bar_t. beta is clipped so both endpoints stay strictly inside (0, 1).
    """

    def __init__(self, betas: np.ndarray):
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise InvalidInputError("betas must be a non-empty 1-D array")
        if betas.min() <= 0.0 or betas.max() >= 1.0:
            raise InvalidInputError("betas must lie strictly inside (0, 1)")
        self.betas = betas
        self.alphas = 1.0 - betas
        self.alpha_bars = np.cumprod(self.alphas)
        self.T = betas.size

    @classmethod
    def cosine(cls, T: int = 1000, s: float = 0.008, max_beta: float = 0.999) -> "NoiseSchedule":
        """Cosine alpha_bar schedule; betas derived from consecutive ratios."""
        steps = np.arange(T + 1, dtype=np.float64)
        f = np.cos((steps / T + s) / (1.0 + s) * math.pi / 2.0) ** 2
        alpha_bar = f / f[0]
        betas = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 1e-8, max_beta)
        return cls(betas)

    @classmethod
    def linear(cls, T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> "NoiseSchedule":
        return cls(np.linspace(beta_start, beta_end, T))

    def alpha_bar(self, t: int) -> float:
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise InvalidInputError(f"step t={t} outside [1, {self.T}]")

    def gather_alpha_bar(self, t: torch.Tensor, dtype=torch.float32) -> torch.Tensor:
        """alpha_bar for a batch of integer steps (1-indexed)."""
        if int(t.min()) < 1 or int(t.max()) > self.T:
            raise InvalidInputError(f"steps outside [1, {self.T}]")
        table = torch.from_numpy(self.alpha_bars).to(dtype)
        return table[t.long() - 1]


def add_noise(x0: torch.Tensor, t: torch.Tensor | int, noise: torch.Tensor,
              schedule: NoiseSchedule) -> torch.Tensor:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.

    ``t`` is a scalar or one step per batch element; noise matches x0's shape.
    """
    if noise.shape != x0.shape:
        raise InvalidInputError(f"noise shape {tuple(noise.shape)} != x0 {tuple(x0.shape)}")
    if isinstance(t, int):
        ab = torch.tensor(schedule.alpha_bar(t), dtype=x0.dtype)
        return torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise
    ab = schedule.gather_alpha_bar(t, dtype=x0.dtype)
    while ab.ndim < x0.ndim:
        ab = ab.unsqueeze(-1)
    return torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * noise
