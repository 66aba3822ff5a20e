import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance" not in nodeid or "::" not in nodeid:
                continue
            criterion = nodeid.split("::")[1].replace("TestCriterion", "criterion ")
            ok = rows.get(criterion, True) and outcome == "passed"
            rows[criterion] = ok
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for criterion in sorted(rows):
            status = "PASS" if rows[criterion] else "FAIL"
            terminalreporter.write_line(f"[{status}] {criterion}")

from lots.conditioning import ConditioningConfig, ConditioningStage
from lots.encoders import EncoderBundle, EncoderConfig
from lots.types import ConditioningSet, LocalizedPair, SketchImage


SMALL_ENCODER = EncoderConfig(
    sketch_patch=16, sketch_dim=32, sketch_blocks=1,
    text_dim=32, text_blocks=1, vocab_size=2048, max_positions=256, seed=3,
)


@pytest.fixture
def small_stage() -> ConditioningStage:
    enc = EncoderBundle(SMALL_ENCODER, latent_dim=16)
    return ConditioningStage(ConditioningConfig(latent_dim=16, pool_tokens=4, seed=3), enc)


def random_sketch(rng: np.random.Generator, size: int = 64) -> SketchImage:
    return SketchImage(rng.random((size, size), dtype=np.float32))


def random_pair(rng: np.random.Generator, tokenizer, size: int = 64,
                text: str | None = None) -> LocalizedPair:
    if text is None:
        words = ["red", "blue", "vest", "shirt", "pants", "striped", "dotted", "long"]
        text = " ".join(rng.choice(words, size=3))
    return LocalizedPair(sketch=random_sketch(rng, size), text=text,
                         token_ids=tokenizer.encode(text))


def random_set(rng: np.random.Generator, tokenizer, n_pairs: int,
               size: int = 64) -> ConditioningSet:
    from lots.dataset.sketchops import compose_global_sketch

    pairs = tuple(random_pair(rng, tokenizer, size) for _ in range(n_pairs))
    global_sketch = compose_global_sketch([p.sketch for p in pairs])
    ctx = "a picture of a model posing"
    return ConditioningSet(pairs=pairs, global_sketch=global_sketch,
                           global_context=ctx, global_context_ids=tokenizer.encode(ctx))
