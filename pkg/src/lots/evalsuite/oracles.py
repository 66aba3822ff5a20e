"""Embedding and VQA oracles.

Real runs plug in remote CLIP/VQA services; tests and desk-scale studies use
the deterministic pixel-statistics mocks below. Reports always record which
oracle produced their numbers; the two kinds are never silently mixed.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from ..dataset.colors import PALETTE_24, rgb_to_lab
from ..errors import OracleError


class EmbeddingOracle(Protocol):
    identifier: str
    dim: int

    def embed_image(self, image: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class VqaOracle(Protocol):
    identifier: str

    def prob_yes(self, image: np.ndarray, question: str) -> float: ...


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        v = v.copy()
        v[0] = 1.0
        return v
    return v / n


class PixelStatsEmbedding:
    """Deterministic image/text embedding from coarse pixel statistics.

    Images embed as a 4x4x3 mean-color grid; text embeds words through a
    seeded random projection. Outputs are unit-norm.
    """

    identifier = "mock-pixelstats"
    dim = 48

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        h, w, _ = arr.shape
        ys = np.linspace(0, h, 5).astype(int)
        xs = np.linspace(0, w, 5).astype(int)
        cells = np.zeros((4, 4, 3))
        for i in range(4):
            for j in range(4):
                block = arr[ys[i]:max(ys[i + 1], ys[i] + 1), xs[j]:max(xs[j + 1], xs[j] + 1)]
                cells[i, j] = block.reshape(-1, 3).mean(axis=0)
        return _unit(cells.reshape(-1))

    def embed_text(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for word in text.lower().split():
            seed = int.from_bytes(hashlib.sha256(word.encode()).digest()[:4], "little")
            vec += np.random.default_rng(seed).normal(size=self.dim)
        return _unit(vec)


_STUDY_NAMES = ("red", "green", "blue", "yellow", "purple", "orange",
                "black", "white", "gray", "brown", "pink")


class PixelStatsVqa:
    """Deterministic color-question oracle.

    For a question naming a palette color, the answer is the fraction of
    non-white pixels whose nearest palette color matches it. Questions with
    no recognizable color term score 0.5 (uninformative).
    """

    identifier = "mock-pixelstats"

    def __init__(self, names: tuple[str, ...] = _STUDY_NAMES):
        self.names = [n for n in names if n in PALETTE_24]
        self._lab = rgb_to_lab(
            np.array([PALETTE_24[n] for n in self.names], dtype=np.float64) / 255.0
        )

    def _color_in(self, question: str) -> str | None:
        for word in question.lower().replace("?", " ").replace(",", " ").split():
            if word in self.names:
                return word
        return None

    def classify_pixels(self, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(names index per pixel, non-white mask) over all pixels."""
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        flat = arr.reshape(-1, 3)
        non_white = ~np.all(flat > 0.93, axis=1)
        lab = rgb_to_lab(flat)
        dist = np.linalg.norm(lab[:, None, :] - self._lab[None], axis=2)
        return dist.argmin(axis=1), non_white

    def color_fractions(self, image: np.ndarray) -> dict[str, float]:
        idx, non_white = self.classify_pixels(image)
        if not non_white.any():
            return {}
        counts = np.bincount(idx[non_white], minlength=len(self.names))
        total = counts.sum()
        return {n: float(c) / total for n, c in zip(self.names, counts) if c > 0}

    def prob_yes(self, image: np.ndarray, question: str) -> float:
        color = self._color_in(question)
        if color is None:
            return 0.5
        return self.color_fractions(image).get(color, 0.0)


class ConstantVqa:
    """Answers every question with a fixed probability; test plumbing."""

    def __init__(self, value: float):
        self.value = value
        self.identifier = f"mock-constant-{value}"

    def prob_yes(self, image: np.ndarray, question: str) -> float:
        return self.value


class RemoteEmbeddingOracle:
    """CLIP-style service client; JSON over HTTP."""

    def __init__(self, url: str, dim: int = 512, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.dim = dim
        self.timeout = timeout
        self.identifier = f"remote:{self.url}"

    def _post(self, endpoint: str, payload: dict) -> np.ndarray:
        import httpx

        try:
            resp = httpx.post(f"{self.url}/{endpoint}", json=payload, timeout=self.timeout)
            resp.raise_for_status()
            return _unit(np.asarray(resp.json()["embedding"], dtype=np.float64))
        except Exception as exc:
            raise OracleError(f"embedding oracle failed: {exc}") from exc

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        import base64
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray((np.clip(image, 0, 1) * 255).astype(np.uint8)).save(buf, format="PNG")
        return self._post("embed_image", {"image": base64.b64encode(buf.getvalue()).decode()})

    def embed_text(self, text: str) -> np.ndarray:
        return self._post("embed_text", {"text": text})


class RemoteVqaOracle:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.identifier = f"remote:{self.url}"

    def prob_yes(self, image: np.ndarray, question: str) -> float:
        import base64
        import io

        import httpx
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray((np.clip(image, 0, 1) * 255).astype(np.uint8)).save(buf, format="PNG")
        try:
            resp = httpx.post(
                f"{self.url}/vqa",
                json={"image": base64.b64encode(buf.getvalue()).decode(), "question": question},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return float(resp.json()["prob_yes"])
        except Exception as exc:
            raise OracleError(f"vqa oracle failed: {exc}") from exc
