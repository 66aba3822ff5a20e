"""External text-generation / vision-QA clients with caching and retries.

Both model families are treated as remote oracles behind small request and
response contracts. Responses are cached on disk keyed by a content hash so
rebuilds are reproducible and cheap; cache writes are atomic (single writer
per key via tmp-file rename).
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from pathlib import Path
from typing import Protocol

import httpx

from ..errors import LotsError


class ClientError(LotsError):
    """Remote model call failed after all retries."""


class TextGenClient(Protocol):
    def generate(self, instruction: str, prompt: str) -> str: ...


class VisionQAClient(Protocol):
    def ask(self, image_png: bytes, question: str) -> str: ...


class ResponseCache:
    def __init__(self, cache_dir: str | Path):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        return None

    def put(self, key: str, response: str) -> None:
        tmp = self._path(key).with_suffix(f".tmp.{os.getpid()}")
        tmp.write_text(json.dumps({"response": response}), encoding="utf-8")
        tmp.replace(self._path(key))


def content_key(*parts: bytes | str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8") if isinstance(p, str) else p)
        h.update(b"\x00")
    return h.hexdigest()


class RemoteClient:
    """Shared HTTP plumbing: 3 retries with exponential backoff, hard timeout."""

    def __init__(self, url: str, cache_dir: str | Path | None = None,
                 timeout: float = 30.0, retries: int = 3, backoff: float = 0.5):
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.cache = ResponseCache(cache_dir) if cache_dir else None

    def _post(self, payload: dict, key: str) -> str:
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = httpx.post(self.url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                text = resp.json()["response"]
                if self.cache is not None:
                    self.cache.put(key, text)
                return text
            except Exception as exc:  # noqa: BLE001 - every failure is retried
                last_error = exc
                if attempt < self.retries - 1:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ClientError(f"remote call to {self.url} failed: {last_error}")


class RemoteTextGenClient(RemoteClient):
    def generate(self, instruction: str, prompt: str) -> str:
        payload = {"instruction": instruction, "prompt": prompt}
        return self._post(payload, content_key("textgen", instruction, prompt))


class RemoteVisionQAClient(RemoteClient):
    def ask(self, image_png: bytes, question: str) -> str:
        payload = {
            "image": base64.b64encode(image_png).decode("ascii"),
            "question": question,
        }
        return self._post(payload, content_key("vqa", image_png, question))
