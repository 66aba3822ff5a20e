"""Command-line interface.

Thin wrappers over the library: dataset building and inspection, training,
sampling, evaluation, the localization study, the HTTP service, and a client
command that talks to a running service. Failures print one machine-readable
JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import base64
import json
import os
import sys
from pathlib import Path

import click

from .errors import LotsError


@click.group()
def cli():
    """Multi-localized sketch-text image generation toolkit."""


# ---------------------------------------------------------------- dataset


@cli.group()
def dataset():
    """Build, inspect, and validate garment datasets."""


@dataset.command("build")
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--client", type=click.Choice(["none", "remote"]), default="none",
              help="Caption/color annotation source; remote needs --caption-url/--color-url.")
@click.option("--caption-url", default=None)
@click.option("--color-url", default=None)
@click.option("--cache-dir", default=None, help="Response cache for remote clients.")
@click.option("--seed", default=0, type=int)
def dataset_build(input_dir, out_dir, client, caption_url, color_url, cache_dir, seed):
    """Build a manifest dataset from a raw annotation dump."""
    from .dataset.build import build_dataset
    from .dataset.clients import RemoteTextGenClient, RemoteVisionQAClient

    caption_client = color_client = None
    if client == "remote":
        if not caption_url or not color_url:
            raise click.UsageError("--client remote needs --caption-url and --color-url")
        caption_client = RemoteTextGenClient(caption_url, cache_dir=cache_dir)
        color_client = RemoteVisionQAClient(color_url, cache_dir=cache_dir)
    manifest = build_dataset(input_dir, out_dir, caption_client=caption_client,
                             color_client=color_client, seed=seed)
    click.echo(json.dumps({"manifest": str(manifest)}))


@dataset.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--train", "n_train", default=2000, type=int)
@click.option("--test", "n_test", default=200, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--size", default=64, type=int)
def dataset_synth(out_dir, n_train, n_test, seed, size):
    """Generate the synthetic colored-shapes corpus."""
    from .dataset import write_synthetic_dataset

    manifest = write_synthetic_dataset(out_dir, n_train, n_test, seed=seed, size=size)
    click.echo(json.dumps({"manifest": str(manifest), "train": n_train, "test": n_test}))


@dataset.command("stats")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--root", default=None, type=click.Path(exists=True),
              help="Dataset root for SSIM summaries; defaults to the manifest's directory.")
@click.option("--ssim", "with_ssim", is_flag=True, default=False)
def dataset_stats_cmd(manifest_path, root, with_ssim):
    """Print a dataset report as JSON."""
    from .dataset import dataset_stats, read_manifest

    entries = read_manifest(manifest_path)
    root = root or str(Path(manifest_path).parent)
    click.echo(json.dumps(dataset_stats(entries, root=root, with_ssim=with_ssim),
                          indent=2, sort_keys=True))


@dataset.command("validate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--root", default=None, type=click.Path(exists=True))
def dataset_validate(manifest_path, root):
    """Check schema validity and file resolvability; nonzero exit on problems."""
    from .dataset import read_manifest
    from .dataset.manifest import validate_entry_files

    entries = read_manifest(manifest_path)
    root = Path(root or Path(manifest_path).parent)
    missing = {}
    for entry in entries:
        bad = validate_entry_files(entry, root)
        if bad:
            missing[entry.image_id] = bad
    if missing:
        click.echo(json.dumps({"error": "MissingFiles", "missing": missing}), err=True)
        sys.exit(1)
    click.echo(json.dumps({"entries": len(entries), "status": "ok"}))


@dataset.command("export-wild")
@click.option("--sessions", "sessions_dir", required=True, type=click.Path(exists=True))
@click.option("--reference", "reference_manifest", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def dataset_export_wild(sessions_dir, reference_manifest, out_path):
    """Convert stored annotation sessions into wild-split manifest entries."""
    from .dataset import read_manifest, write_manifest
    from .service.state import AnnotationStore, export_wild_entries

    store = AnnotationStore(Path(sessions_dir))
    entries = export_wild_entries(store, read_manifest(reference_manifest))
    write_manifest(entries, out_path)
    click.echo(json.dumps({"manifest": str(out_path), "entries": len(entries)}))


# ------------------------------------------------------------------ train


@cli.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True),
              help="Dataset directory containing manifest.jsonl.")
@click.option("--out", "ckpt_path", required=True, type=click.Path())
@click.option("--variant", type=click.Choice(["lots", "concat", "attn", "pool"]),
              default="lots")
@click.option("--k", "pool_tokens", type=click.Choice(["32", "64"]), default="32",
              help="Pair-Former pool size.")
@click.option("--steps", default=200, type=int)
@click.option("--batch", "batch_size", default=32, type=int)
@click.option("--lr", default=1e-4, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--freeze-base", is_flag=True, default=False)
@click.option("--model-size", type=click.Choice(["study", "toy", "default"]),
              default="study")
@click.option("--image-size", default=None, type=int,
              help="Override the model resolution (dataset images are resized).")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="Flat key=value training config; CLI flags win.")
@click.option("--log", "log_path", default=None, type=click.Path())
def train_cmd(data_dir, ckpt_path, variant, pool_tokens, steps, batch_size, lr, seed,
              freeze_base, model_size, image_size, config_path, log_path):
    """Train a model on a manifest dataset and write a checkpoint."""
    import dataclasses

    from .checkpoint import save_checkpoint
    from .dataset import load_training_items, read_manifest
    from .diffusion import LotsModel, ModelConfig, TrainConfig, train
    from .study import study_model_config
    from .types import Variant

    if config_path:
        cfg = TrainConfig.from_flat_file(config_path)
        cfg = dataclasses.replace(cfg, steps=steps, batch_size=batch_size, lr=lr,
                                  seed=seed, variant=Variant(variant),
                                  freeze_base=freeze_base)
    else:
        cfg = TrainConfig(steps=steps, batch_size=batch_size, lr=lr, seed=seed,
                          variant=Variant(variant), freeze_base=freeze_base)

    entries = read_manifest(Path(data_dir) / "manifest.jsonl")
    if model_size == "default":
        model_cfg = ModelConfig()
    elif model_size == "toy":
        model_cfg = ModelConfig.toy()
    else:
        model_cfg = study_model_config()
    model_cfg.conditioning.pool_tokens = int(pool_tokens)
    model_cfg.variant = Variant(variant)
    if image_size:
        model_cfg.denoiser.image_size = image_size
    model = LotsModel(model_cfg)

    items = [(x0, cs) for x0, cs, _ in
             load_training_items(entries, data_dir, model.tokenizer, split="train",
                                 image_size=model.image_size)]
    losses = train(model, items, cfg, log_path=log_path)
    save_checkpoint(model, ckpt_path)
    click.echo(json.dumps({
        "checkpoint": str(ckpt_path),
        "steps": cfg.steps,
        "final_loss": losses[-1] if losses else None,
    }))


# ----------------------------------------------------------------- sample


@cli.command("sample")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--split", default="test")
@click.option("--limit", default=0, type=int, help="0 = all entries in the split.")
@click.option("--seed", default=0, type=int)
@click.option("--steps", default=50, type=int)
@click.option("--alpha", default=1.0, type=float)
@click.option("--guidance", "guidance_scale", default=1.0, type=float)
@click.option("--sampler", type=click.Choice(["deterministic", "ancestral"]),
              default="deterministic")
def sample_cmd(ckpt_path, data_dir, out_dir, split, limit, seed, steps, alpha,
               guidance_scale, sampler):
    """Generate one image per manifest entry; deterministic under a fixed seed."""
    import numpy as np
    from PIL import Image

    from .checkpoint import load_checkpoint
    from .dataset import load_training_items, read_manifest
    from .diffusion import SamplerConfig, sample

    model = load_checkpoint(ckpt_path)
    model.eval()
    entries = read_manifest(Path(data_dir) / "manifest.jsonl")
    items = load_training_items(entries, data_dir, model.tokenizer, split=split,
                                image_size=model.image_size)
    if limit:
        items = items[:limit]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SamplerConfig(steps=steps, guidance_scale=guidance_scale, alpha=alpha,
                        seed=seed, sampler=sampler)
    written = []
    for _, cs, entry in items:
        images = sample([cs], cfg, model)
        arr = (images[0].permute(1, 2, 0).numpy() * 255).astype(np.uint8)
        path = out / f"{entry.image_id}.png"
        Image.fromarray(arr).save(path)
        written.append(str(path))
    click.echo(json.dumps({"generated": len(written), "out": str(out)}))


# ------------------------------------------------------------------- eval


@cli.group("eval")
def eval_group():
    """Evaluation protocols."""


@eval_group.command("run")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--gen-dir", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="ssim,fid,localclip,lvqa",
              help="Comma-separated subset of ssim,fid,globalclip,localclip,vqa,lvqa.")
@click.option("--oracle", default="mock",
              help="'mock' or 'remote:URL' for the embedding/VQA oracles.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--root", default=None, type=click.Path(exists=True))
@click.option("--split", default="test")
@click.option("--seed", default=0, type=int)
def eval_run(manifest_path, gen_dir, metrics, oracle, out_path, root, split, seed):
    """Score generated images against a manifest; writes a versioned report."""
    from .dataset import read_manifest
    from .errors import InvalidInputError
    from .evalsuite import (
        PixelStatsEmbedding,
        PixelStatsVqa,
        RemoteEmbeddingOracle,
        RemoteVqaOracle,
        run_eval,
    )

    entries = [e for e in read_manifest(manifest_path) if e.split == split]
    root = root or str(Path(manifest_path).parent)
    if oracle == "mock":
        embed, vqa = PixelStatsEmbedding(), PixelStatsVqa()
    elif oracle.startswith("remote:"):
        url = oracle.split(":", 1)[1]
        embed, vqa = RemoteEmbeddingOracle(url), RemoteVqaOracle(url)
    else:
        raise InvalidInputError(f"unknown oracle {oracle!r}; use mock or remote:URL")
    report = run_eval(entries, root, gen_dir, metrics.split(","),
                      embed_oracle=embed, vqa_oracle=vqa, seed=seed)
    report.save(out_path)
    click.echo(json.dumps({"report": str(out_path), "metrics": report.metrics},
                          sort_keys=True))


# ------------------------------------------------------------------ study


@cli.command("study")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--train-samples", default=2000, type=int)
@click.option("--test-samples", default=200, type=int)
@click.option("--steps", default=700, type=int)
@click.option("--seeds", default="0,1,2")
@click.option("--eval-samples", default=200, type=int)
def study_cmd(out_dir, train_samples, test_samples, steps, seeds, eval_samples):
    """Run the localization study (LOTS vs POOL) and write its report."""
    from .study import StudyConfig, run_study

    cfg = StudyConfig(train_samples=train_samples, test_samples=test_samples,
                      steps=steps, seeds=tuple(int(s) for s in seeds.split(",")),
                      eval_samples=eval_samples)
    result = run_study(cfg, out_dir=out_dir,
                       on_progress=lambda run: click.echo(json.dumps(run)))
    click.echo(json.dumps(result["summary"], indent=2, sort_keys=True))


# ------------------------------------------------------------------ serve


@cli.command("serve")
@click.option("--ckpt", "ckpt_path", default=None, type=click.Path(),
              help="Defaults to $LOTS_CKPT.")
@click.option("--data", "data_dir", default=None, type=click.Path(),
              help="Defaults to $LOTS_DATA_DIR.")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=None, type=int, help="Defaults to $LOTS_PORT or 8000.")
@click.option("--queue-depth", default=8, type=int)
def serve_cmd(ckpt_path, data_dir, host, port, queue_depth):
    """Run the generation/annotation HTTP service."""
    import uvicorn

    from .service import create_app

    port = port or int(os.environ.get("LOTS_PORT", "8000"))
    app = create_app(ckpt_path=ckpt_path, data_dir=data_dir, queue_depth=queue_depth)
    uvicorn.run(app, host=host, port=port)


# --------------------------------------------------------------- generate


@cli.command("generate")
@click.option("--url", default="http://127.0.0.1:8000")
@click.option("--sketch", "sketches", multiple=True, required=True,
              type=click.Path(exists=True), help="512x512 PNG; repeat per pair.")
@click.option("--text", "texts", multiple=True, required=True,
              help="Localized description; repeat per pair, same order.")
@click.option("--global-context", default=None)
@click.option("--alpha", default=1.0, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--steps", default=50, type=int)
@click.option("--variant", type=click.Choice(["lots", "concat", "attn", "pool"]),
              default="lots")
@click.option("--out", "out_path", required=True, type=click.Path())
def generate_cmd(url, sketches, texts, global_context, alpha, seed, steps, variant,
                 out_path):
    """Client for POST /v1/generate on a running service."""
    import httpx

    if len(sketches) != len(texts):
        raise click.UsageError("--sketch and --text counts must match")
    pairs = []
    for i, (sk, text) in enumerate(zip(sketches, texts)):
        pairs.append({
            "sketch": base64.b64encode(Path(sk).read_bytes()).decode("ascii"),
            "text": text,
            "layer_id": f"layer{i}",
        })
    payload = {"pairs": pairs, "alpha": alpha, "seed": seed, "steps": steps,
               "variant": variant}
    if global_context is not None:
        payload["global_context"] = global_context
    resp = httpx.post(f"{url}/v1/generate", json=payload, timeout=600.0)
    if resp.status_code != 200:
        raise LotsError(f"service returned {resp.status_code}: {resp.text}")
    body = resp.json()
    Path(out_path).write_bytes(base64.b64decode(body["image"]))
    click.echo(json.dumps({"out": out_path, "request_id": body["request_id"],
                           "timings": body["timings"]}))


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        click.echo(json.dumps({"error": "UsageError", "message": exc.format_message()}),
                   err=True)
        sys.exit(exc.exit_code or 2)
    except LotsError as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
                   err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
