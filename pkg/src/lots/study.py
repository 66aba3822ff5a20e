"""Desk-scale localization study: LOTS vs pooled conditioning.

Trains the chosen fusion variants on the synthetic colored-shapes corpus for
an equal step budget, generates the test split, and scores localized color
accuracy and attribute leakage with the deterministic pixel-statistics
oracle. Leakage counts ordered garment pairs (i, j), i != j, whose regions
render garment i's specified color on garment j.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .conditioning import ConditioningConfig
from .dataset.colors import composite_on_white
from .dataset.synthetic import (
    STUDY_COLORS,
    SyntheticSample,
    generate_samples,
    sample_to_conditioning,
    sample_to_training_item,
)
from .diffusion import (
    DenoiserConfig,
    LotsModel,
    ModelConfig,
    SamplerConfig,
    TrainConfig,
    sample,
    train,
)
from .encoders import EncoderConfig
from .evalsuite.oracles import PixelStatsVqa
from .types import Variant


@dataclass
class StudyConfig:
    train_samples: int = 2000
    test_samples: int = 200
    image_size: int = 64
    seeds: tuple[int, ...] = (0, 1, 2)
    variants: tuple[Variant, ...] = (Variant.LOTS, Variant.POOL)
    steps: int = 1100
    batch_size: int = 8
    lr: float = 3e-4
    cond_lr_mult: float = 3.0
    p_drop: float = 0.1
    guidance_scale: float = 3.0
    sample_steps: int = 16
    sample_batch: int = 32
    eval_samples: int = 200

    def __post_init__(self):
        self.variants = tuple(Variant(v) for v in self.variants)


def study_model_config(image_size: int = 64, seed: int = 0) -> ModelConfig:
    """Small configuration sized for two-core training runs."""
    return ModelConfig(
        encoder=EncoderConfig(sketch_patch=16, sketch_dim=64, sketch_blocks=1,
                              text_dim=64, text_blocks=1, seed=seed),
        conditioning=ConditioningConfig(latent_dim=64, pool_tokens=4, seed=seed),
        denoiser=DenoiserConfig(image_size=image_size, base_width=16,
                                channel_mults=(1, 2, 4), blocks_per_level=1,
                                attn_resolutions=(16,), heads=4,
                                text_ctx_dim=64, cond_dim=64,
                                adapter_zero_init=False, adapter_init_gain=4.0,
                                seed=seed),
        timesteps=1000,
    )


def train_variant(variant: Variant, seed: int, train_items, cfg: StudyConfig,
                  log_path: Path | None = None) -> LotsModel:
    model = LotsModel(study_model_config(cfg.image_size, seed=seed))
    train_cfg = TrainConfig(steps=cfg.steps, batch_size=cfg.batch_size, lr=cfg.lr,
                            cond_lr_mult=cfg.cond_lr_mult, p_drop=cfg.p_drop,
                            variant=variant, seed=seed)
    train(model, train_items, train_cfg, log_path=log_path)
    model.eval()
    return model


def predicted_region_colors(image: np.ndarray, sample_spec: SyntheticSample,
                            oracle: PixelStatsVqa) -> list[str | None]:
    """Dominant study color per garment region of a generated image."""
    names = list(STUDY_COLORS)
    out = []
    for g in sample_spec.garments:
        region = composite_on_white(image, g.mask)
        fractions = oracle.color_fractions(region)
        scores = {n: fractions.get(n, 0.0) for n in names}
        best = max(scores, key=scores.get)
        out.append(best if scores[best] > 0.0 else None)
    return out


def localization_scores(images: list[np.ndarray], specs: list[SyntheticSample],
                        oracle: PixelStatsVqa | None = None) -> dict:
    """Color accuracy and leakage rate over generated images."""
    oracle = oracle or PixelStatsVqa()
    correct = total = 0
    leaks = leak_pairs = 0
    rows = []
    for image, spec in zip(images, specs):
        predicted = predicted_region_colors(image, spec, oracle)
        specified = [g.color for g in spec.garments]
        for i, g in enumerate(spec.garments):
            total += 1
            correct += int(predicted[i] == specified[i])
        for i in range(len(spec.garments)):
            for j in range(len(spec.garments)):
                if i == j or specified[i] == specified[j]:
                    continue
                leak_pairs += 1
                leaks += int(predicted[j] == specified[i])
        rows.append({"sample_id": spec.sample_id, "specified": specified,
                     "predicted": predicted})
    return {
        "accuracy": correct / max(total, 1),
        "leakage": leaks / max(leak_pairs, 1),
        "garments": total,
        "leak_pairs": leak_pairs,
        "rows": rows,
    }


@torch.no_grad()
def generate_test_images(model: LotsModel, specs: list[SyntheticSample],
                         cfg: StudyConfig, variant: Variant,
                         seed: int = 0) -> list[np.ndarray]:
    images = []
    for start in range(0, len(specs), cfg.sample_batch):
        chunk = specs[start:start + cfg.sample_batch]
        sets = [sample_to_conditioning(s, model.tokenizer) for s in chunk]
        out = sample(sets, SamplerConfig(steps=cfg.sample_steps, seed=seed + start,
                                         guidance_scale=cfg.guidance_scale),
                     model, variant=variant)
        images.extend(img.permute(1, 2, 0).numpy() for img in out)
    return images


def run_study(cfg: StudyConfig | None = None, out_dir: str | Path | None = None,
              on_progress=None) -> dict:
    """Full study: every (variant, seed) run trained and scored.

    Returns per-run scores plus per-variant means and the LOTS-vs-POOL gap.
    """
    cfg = cfg or StudyConfig()
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    test_specs = generate_samples(cfg.test_samples, seed=10_000, size=cfg.image_size)
    eval_specs = test_specs[: cfg.eval_samples]
    oracle = PixelStatsVqa()

    runs = []
    for seed in cfg.seeds:
        train_specs = generate_samples(cfg.train_samples, seed=seed, size=cfg.image_size)
        for variant in cfg.variants:
            started = time.monotonic()
            tokenizer_probe = LotsModel(study_model_config(cfg.image_size, seed=seed))
            items = [sample_to_training_item(s, tokenizer_probe.tokenizer)
                     for s in train_specs]
            del tokenizer_probe
            log_path = out / f"train_{variant.value}_s{seed}.jsonl" if out else None
            model = train_variant(variant, seed, items, cfg, log_path=log_path)
            images = generate_test_images(model, eval_specs, cfg, variant, seed=seed)
            scores = localization_scores(images, eval_specs, oracle)
            run = {
                "variant": variant.value,
                "seed": seed,
                "accuracy": scores["accuracy"],
                "leakage": scores["leakage"],
                "wall_time_s": round(time.monotonic() - started, 1),
            }
            runs.append(run)
            if on_progress is not None:
                on_progress(run)
            if out:
                (out / f"run_{variant.value}_s{seed}.json").write_text(
                    json.dumps({**run, "rows": scores["rows"]}, indent=2))

    summary = summarize_runs(runs)
    result = {"config": _config_dict(cfg), "runs": runs, "summary": summary,
              "oracle": oracle.identifier}
    if out:
        (out / "study.json").write_text(json.dumps(result, indent=2, sort_keys=True))
    return result


def summarize_runs(runs: list[dict]) -> dict:
    by_variant: dict[str, dict] = {}
    for variant in {r["variant"] for r in runs}:
        vruns = [r for r in runs if r["variant"] == variant]
        by_variant[variant] = {
            "accuracy_mean": float(np.mean([r["accuracy"] for r in vruns])),
            "leakage_mean": float(np.mean([r["leakage"] for r in vruns])),
            "runs": len(vruns),
        }
    return by_variant


def _config_dict(cfg: StudyConfig) -> dict:
    d = asdict(cfg)
    d["variants"] = [v.value for v in cfg.variants]
    d["seeds"] = list(cfg.seeds)
    return d
