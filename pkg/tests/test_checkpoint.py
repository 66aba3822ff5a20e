"""Checkpoint archive: canonical names, config embedding, round-trip."""

import json
import zipfile

import numpy as np
import pytest
import torch

from conftest import random_set

from lots.checkpoint import (
    FORMAT,
    canonical_name,
    checkpoint_hash,
    load_checkpoint,
    read_header,
    save_checkpoint,
)
from lots.conditioning import ConditioningConfig
from lots.diffusion import DenoiserConfig, LotsModel, ModelConfig
from lots.encoders import EncoderConfig
from lots.errors import SchemaError


CKPT_MODEL = ModelConfig(
    encoder=EncoderConfig(sketch_patch=8, sketch_dim=32, sketch_blocks=1,
                          text_dim=32, text_blocks=1, seed=2),
    conditioning=ConditioningConfig(latent_dim=32, pool_tokens=4, seed=2),
    denoiser=DenoiserConfig(image_size=16, base_width=8, blocks_per_level=1,
                            attn_resolutions=(8,), text_ctx_dim=32, cond_dim=32, seed=2),
    timesteps=20,
)


def test_canonical_names():
    assert canonical_name("stage.pair_former.z") == "pair_former.z"
    assert canonical_name("encoders.proj.W_T") == "proj.W_T"
    assert canonical_name("stage.global.Q") == "global.Q"
    assert canonical_name("denoiser.stem.weight") == "denoiser.stem.weight"


def test_header_carries_format_and_shapes(tmp_path):
    model = LotsModel(CKPT_MODEL)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    header = read_header(path)
    assert header["format"] == FORMAT
    tensors = header["tensors"]
    for name in ("pair_former.z", "proj.W_T", "proj.W_S", "global.W_g",
                 "global.Q", "global.K", "global.V", "global.out", "null_cond"):
        assert name in tensors, name
    assert tensors["pair_former.z"]["shape"] == [4, 32]
    assert tensors["pair_former.z"]["dtype"] == "float32"
    assert header["config"]["conditioning"]["pool_tokens"] == 4


def test_roundtrip_preserves_outputs(tmp_path):
    model = LotsModel(CKPT_MODEL)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    rng = np.random.default_rng(0)
    cs = random_set(rng, model.tokenizer, n_pairs=2, size=16)
    x = torch.randn(1, 3, 16, 16)
    t = torch.tensor([5])
    with torch.no_grad():
        a = model.predict_noise(x, t, [cs])
        b = loaded.predict_noise(x, t, [cs])
    assert torch.equal(a, b)


def test_bad_format_rejected(tmp_path):
    model = LotsModel(CKPT_MODEL)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("header.json"))
        names = zf.namelist()
        payload = {n: zf.read(n) for n in names if n != "header.json"}
    header["format"] = "lots-ckpt/2"
    bad = tmp_path / "bad.ckpt"
    with zipfile.ZipFile(bad, "w") as zf:
        zf.writestr("header.json", json.dumps(header))
        for n, data in payload.items():
            zf.writestr(n, data)
    with pytest.raises(SchemaError) as err:
        read_header(bad)
    assert err.value.field == "format"


def test_checkpoint_hash_stable(tmp_path):
    model = LotsModel(CKPT_MODEL)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    assert checkpoint_hash(path) == checkpoint_hash(path)
    assert len(checkpoint_hash(path)) == 16
