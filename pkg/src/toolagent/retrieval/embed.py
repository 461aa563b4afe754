"""Embedding providers for cross-modal retrieval.

The index stores one unit-norm vector per passage; queries (text or an image
reference) are embedded by a provider that shares that vector space. The
actual encoder is deployment configuration — an HTTP service in production,
a deterministic stub in tests — behind one small interface.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
import requests


class EmbeddingUnavailable(Exception):
    """No embedding provider is configured, or the provider call failed."""


class EmbeddingProvider(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray:
        ...

    def embed_image(self, image_ref: str) -> np.ndarray:
        ...


def unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (vec / norm).astype(np.float32)


class StubEmbeddingProvider:
    """Deterministic hash-seeded vectors; same input, same vector, any host."""

    def __init__(self, dim: int = 16):
        self.dim = dim

    def _vec(self, key: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")
        rng = np.random.default_rng(seed)
        return unit(rng.standard_normal(self.dim))

    def embed_text(self, text: str) -> np.ndarray:
        return self._vec("text:" + text)

    def embed_image(self, image_ref: str) -> np.ndarray:
        return self._vec("image:" + image_ref)


class HttpEmbeddingProvider:
    """POSTs {"text": ...} or {"image": ...} and expects {"embedding": [...]}."""

    def __init__(self, endpoint: str, dim: int, *, timeout: float = 60.0):
        self.endpoint = endpoint
        self.dim = dim
        self.timeout = timeout
        self._session = requests.Session()

    def _call(self, payload: dict) -> np.ndarray:
        try:
            resp = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            vec = np.asarray(resp.json()["embedding"], dtype=np.float32)
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise EmbeddingUnavailable(f"embedding call failed: {exc}") from exc
        if vec.shape != (self.dim,):
            raise EmbeddingUnavailable(
                f"embedding has shape {vec.shape}, expected ({self.dim},)"
            )
        return unit(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._call({"text": text})

    def embed_image(self, image_ref: str) -> np.ndarray:
        return self._call({"image": image_ref})
