"""Parameter checkpoint archive.

A zip with a versioned ``header.json`` (format tag, model config, tensor
shapes) and one ``.npy`` entry per tensor under its canonical name:
``pair_former.z``, ``proj.W_S``, ``proj.W_T``, ``global.W_g``,
``global.{Q,K,V,out}``, plus encoder/denoiser/null-block entries.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from .errors import SchemaError

FORMAT = "lots-ckpt/1"

_CANONICAL_PREFIXES = (
    ("stage.pair_former.", "pair_former."),
    ("stage.global.", "global."),
    ("encoders.proj.", "proj."),
)


def canonical_name(state_key: str) -> str:
    for prefix, repl in _CANONICAL_PREFIXES:
        if state_key.startswith(prefix):
            return repl + state_key[len(prefix):]
    return state_key


def state_key(canonical: str) -> str:
    for prefix, repl in _CANONICAL_PREFIXES:
        if canonical.startswith(repl):
            return prefix + canonical[len(repl):]
    return canonical


def save_checkpoint(model, path: str | Path) -> None:
    from .diffusion.model import LotsModel  # local import to avoid a cycle

    assert isinstance(model, LotsModel)
    tensors = {canonical_name(k): v for k, v in model.state_dict().items()}
    header = {
        "format": FORMAT,
        "config": model.config.to_dict(),
        "tensors": {
            name: {"shape": list(t.shape), "dtype": "float32"} for name, t in tensors.items()
        },
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("header.json", json.dumps(header, indent=1, sort_keys=True))
        for name, t in tensors.items():
            buf = io.BytesIO()
            np.save(buf, t.detach().cpu().numpy().astype(np.float32))
            zf.writestr(f"tensors/{name}.npy", buf.getvalue())


def read_header(path: str | Path) -> dict:
    with zipfile.ZipFile(path) as zf:
        try:
            header = json.loads(zf.read("header.json"))
        except KeyError:
            raise SchemaError("checkpoint missing header.json", field="header.json")
    if header.get("format") != FORMAT:
        raise SchemaError(
            f"unsupported checkpoint format {header.get('format')!r}, expected {FORMAT}",
            field="format",
        )
    return header


def load_checkpoint(path: str | Path, tokenizer=None):
    """Rebuild a model from an archive; shapes are validated against the header."""
    from .diffusion.model import LotsModel, ModelConfig

    header = read_header(path)
    model = LotsModel(ModelConfig.from_dict(header["config"]), tokenizer=tokenizer)
    state = {}
    with zipfile.ZipFile(path) as zf:
        for name, meta in header["tensors"].items():
            arr = np.load(io.BytesIO(zf.read(f"tensors/{name}.npy")))
            if list(arr.shape) != meta["shape"]:
                raise SchemaError(
                    f"tensor {name} has shape {list(arr.shape)}, header says {meta['shape']}",
                    field=name,
                )
            state[state_key(name)] = torch.from_numpy(arr)
    model.load_state_dict(state)
    return model


def checkpoint_hash(path: str | Path) -> str:
    import hashlib

    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return digest[:16]
