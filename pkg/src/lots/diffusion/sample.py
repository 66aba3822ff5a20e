"""Samplers: ancestral and deterministic, with classifier-free guidance."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..errors import InvalidInputError
from ..types import ConditioningSet, Variant
from .model import LotsModel


@dataclass
class SamplerConfig:
    steps: int = 50
    guidance_scale: float = 1.0
    alpha: float = 1.0
    seed: int = 0
    sampler: str = "deterministic"  # or "ancestral"
    # first denoising step; None means the schedule end. Starting slightly
    # below T avoids the 1/sqrt(alpha_bar) blow-up of the x0 estimate on the
    # very first step while the pure-noise init stays statistically valid.
    t_start: int | None = None

    def __post_init__(self):
        if self.guidance_scale < 0:
            raise InvalidInputError("guidance_scale must be >= 0")
        if self.sampler not in ("deterministic", "ancestral"):
            raise InvalidInputError(f"unknown sampler: {self.sampler}")


def _step_sequence(T: int, steps: int, t_start: int | None = None) -> list[int]:
    """Descending subsequence of [1, t_start] with ``steps`` entries, ending at 1."""
    top = T if t_start is None else t_start
    if not 1 <= top <= T:
        raise InvalidInputError(f"t_start {top} outside [1, {T}]")
    ts = np.unique(np.linspace(1, top, min(steps, top)).round().astype(int))[::-1]
    return [int(t) for t in ts]


@torch.no_grad()
def sample(sets: Sequence[ConditioningSet], cfg: SamplerConfig, model: LotsModel,
           variant: Variant | None = None) -> torch.Tensor:
    """Generate one image per conditioning set; output in [0, 1].

    Deterministic for a fixed (seed, request, checkpoint) under the
    deterministic sampler. With guidance_scale == 1 the unconditional branch
    is never evaluated.
    """
    schedule = model.schedule
    if cfg.steps > schedule.T:
        raise InvalidInputError(f"steps {cfg.steps} > schedule length {schedule.T}")
    size = model.image_size
    batch = len(sets)
    gen = torch.Generator().manual_seed(cfg.seed)
    x = torch.randn(batch, model.config.denoiser.in_channels, size, size, generator=gen)

    null_sets = [dataclasses.replace(cs, dropped=True) for cs in sets]
    timesteps = _step_sequence(schedule.T, cfg.steps, cfg.t_start)

    for i, t in enumerate(timesteps):
        t_batch = torch.full((batch,), t, dtype=torch.long)
        eps = model.predict_noise(x, t_batch, sets, alpha=cfg.alpha, variant=variant)
        if cfg.guidance_scale != 1.0:
            eps_uncond = model.predict_noise(x, t_batch, null_sets, alpha=cfg.alpha,
                                             variant=variant)
            eps = eps_uncond + cfg.guidance_scale * (eps - eps_uncond)

        ab_t = schedule.alpha_bar(t)
        x0 = (x - math.sqrt(1.0 - ab_t) * eps) / math.sqrt(ab_t)
        x0 = x0.clamp(-1.0, 1.0)
        t_prev = timesteps[i + 1] if i + 1 < len(timesteps) else 0
        ab_prev = schedule.alpha_bar(t_prev) if t_prev >= 1 else 1.0

        if cfg.sampler == "deterministic":
            x = math.sqrt(ab_prev) * x0 + math.sqrt(1.0 - ab_prev) * eps
        else:
            if t_prev >= 1:
                # DDPM posterior q(x_prev | x_t, x0) over the subsampled grid
                var = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev)
                mean = (
                    math.sqrt(ab_prev) * (1.0 - ab_t / ab_prev) / (1.0 - ab_t) * x0
                    + math.sqrt(ab_t / ab_prev) * (1.0 - ab_prev) / (1.0 - ab_t) * x
                )
                noise = torch.randn(x.shape, generator=gen, dtype=x.dtype)
                x = mean + math.sqrt(max(var, 0.0)) * noise
            else:
                x = x0

    return ((x + 1.0) / 2.0).clamp(0.0, 1.0)
