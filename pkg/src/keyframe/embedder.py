"""Embedding providers: a deterministic mock and a remote-service client.

Providers map texts and RGB images into one shared vector space and must
return unit-normalized rows (L2 norm 1 within 1e-6). The mock provider is
a pure function with an analytically checkable color geometry, which is
what the planted-frame test oracles rely on. The remote client speaks the
``/v1`` wire protocol:

    POST /v1/info        -> {"name", "dim", "token_budget"}
    POST /v1/embed_text  {"texts": [str]}        -> {"vectors": [[float]]}
    POST /v1/embed_image {"images": [b64 PNG]}   -> {"vectors": [[float]]}
"""

from __future__ import annotations

import base64
import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import cv2
import numpy as np
import requests

from .errors import ProviderError

MOCK_DIM = 512
MOCK_TOKEN_BUDGET = 77

# Color keyword geometry: components 0-2 are RGB; component 3 is the
# neutral axis used for black and colorless images.
COLOR_KEYWORDS: dict[str, tuple[float, float, float]] = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
}
NEUTRAL_COMPONENT = 3  # "black" and zero-color images land here

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash (fixed algorithm, platform independent)."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class ProviderInfo:
    name: str
    dim: int
    token_budget: int


class EmbeddingProvider(Protocol):
    def info(self) -> ProviderInfo: ...

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray: ...


def validate_embeddings(vectors: np.ndarray, expected_dim: int, n: int) -> None:
    """Check the provider contract: shape (n, dim), unit rows within 1e-6."""
    if vectors.shape != (n, expected_dim):
        raise ProviderError(
            f"embedding shape {vectors.shape} != ({n}, {expected_dim})"
        )
    norms = np.linalg.norm(vectors, axis=1)
    worst = float(np.max(np.abs(norms - 1.0))) if n else 0.0
    if worst > 1e-6:
        raise ProviderError(f"embedding rows not unit-norm (max |n-1| = {worst:.2e})")


def _normalize(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


class MockProvider:
    """Deterministic color-channel provider used as the test oracle.

    Images embed to their mean RGB in components 0-2 (a colorless image
    falls back to the neutral component). Texts embed to the average of
    any matched color-keyword vectors; texts without color words hash
    each token onto components 4+ with FNV-1a. All outputs unit-norm.
    """

    def info(self) -> ProviderInfo:
        return ProviderInfo(name="mock-color", dim=MOCK_DIM, token_budget=MOCK_TOKEN_BUDGET)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), MOCK_DIM), dtype=np.float64)
        for row, text in enumerate(texts):
            if not text:
                raise ProviderError("empty text")
            out[row] = self._embed_one_text(text)
        return out

    def _embed_one_text(self, text: str) -> np.ndarray:
        vec = np.zeros(MOCK_DIM, dtype=np.float64)
        tokens = [t.strip(".,!?;:'\"()[]") for t in text.lower().split()]
        tokens = [t for t in tokens if t]
        matched = 0
        for tok in tokens:
            if tok in COLOR_KEYWORDS:
                vec[0:3] += COLOR_KEYWORDS[tok]
                matched += 1
            elif tok == "black":
                vec[NEUTRAL_COMPONENT] += 1.0
                matched += 1
        if matched:
            vec /= matched
        else:
            for tok in tokens:
                h = fnv1a64(tok.encode("utf-8"))
                vec[4 + (h % (MOCK_DIM - 4))] += 1.0
        if not tokens:
            raise ProviderError(f"no tokens in text {text!r}")
        return _normalize(vec)

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros((len(images), MOCK_DIM), dtype=np.float64)
        for row, pixels in enumerate(images):
            if pixels.size == 0:
                raise ProviderError("empty image")
            mean_rgb = pixels.reshape(-1, 3).mean(axis=0) / 255.0
            vec = np.zeros(MOCK_DIM, dtype=np.float64)
            vec[0:3] = mean_rgb
            if np.linalg.norm(vec[0:3]) < 1e-9:
                vec[:] = 0.0
                vec[NEUTRAL_COMPONENT] = 1.0
            out[row] = _normalize(vec)
        return out


class RemoteProvider:
    """HTTP client for an embedding service speaking the /v1 protocol.

    Requests are batched (at most ``batch_size`` items each), retried with
    exponential backoff on transient failures (transport errors, 503), and
    reassembled in input order. In-flight requests across threads are
    capped by a semaphore. Received vectors are re-normalized so the
    provider contract holds exactly even under float serialization drift.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        batch_size: int = 32,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff: float = 0.2,
        max_in_flight: int = 8,
        session: requests.Session | None = None,
    ):
        if batch_size < 1 or batch_size > 32:
            raise ValueError("batch_size must be in 1..32")
        self.endpoint = endpoint.rstrip("/")
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._session = session or requests.Session()
        self._sem = threading.Semaphore(max_in_flight)
        self._info: ProviderInfo | None = None
        self._info_lock = threading.Lock()

    def info(self) -> ProviderInfo:
        with self._info_lock:
            if self._info is None:
                payload = self._post("/v1/info", {})
                try:
                    self._info = ProviderInfo(
                        name=str(payload["name"]),
                        dim=int(payload["dim"]),
                        token_budget=int(payload["token_budget"]),
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ProviderError(f"malformed info response: {exc}") from exc
            return self._info

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self._embed_batched("/v1/embed_text", "texts", list(texts))

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        encoded = [self._encode_png(img) for img in images]
        return self._embed_batched("/v1/embed_image", "images", encoded)

    @staticmethod
    def _encode_png(pixels: np.ndarray) -> str:
        ok, buf = cv2.imencode(".png", cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR))
        if not ok:
            raise ProviderError("PNG encoding failed")
        return base64.b64encode(buf.tobytes()).decode("ascii")

    def _embed_batched(self, path: str, key: str, items: list) -> np.ndarray:
        dim = self.info().dim
        rows: list[np.ndarray] = []
        for start in range(0, len(items), self.batch_size):
            batch = items[start : start + self.batch_size]
            payload = self._post(path, {key: batch})
            vectors = payload.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise ProviderError(
                    f"response carries {0 if vectors is None else len(vectors)} "
                    f"vectors for {len(batch)} inputs"
                )
            for vec in vectors:
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (dim,):
                    raise ProviderError(
                        f"vector dim {arr.shape} != declared dim {dim}"
                    )
                norm = float(np.linalg.norm(arr))
                if not np.isfinite(norm) or abs(norm - 1.0) > 1e-3:
                    raise ProviderError(f"server vector norm {norm:.4f} far from 1")
                rows.append(arr / norm)
        if not rows:
            return np.zeros((0, dim), dtype=np.float64)
        return np.stack(rows)

    def _post(self, path: str, payload: dict) -> dict:
        url = self.endpoint + path
        last_err: ProviderError | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            with self._sem:
                try:
                    resp = self._session.post(url, json=payload, timeout=self.timeout)
                except requests.RequestException as exc:
                    last_err = ProviderError(f"{url}: {exc}", retryable=True)
                    continue
            if resp.status_code == 503:
                last_err = ProviderError(f"{url}: 503 overloaded", retryable=True)
                continue
            if resp.status_code != 200:
                raise ProviderError(
                    f"{url}: HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ProviderError(f"{url}: invalid JSON response") from exc
        assert last_err is not None
        raise last_err


class MemoProvider:
    """Per-run in-memory memo over any provider, keyed by content hash."""

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()

    def info(self) -> ProviderInfo:
        return self.inner.info()

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        keys = [("text", hashlib.sha1(t.encode("utf-8")).hexdigest()) for t in texts]
        return self._lookup(keys, texts, self.inner.embed_texts)

    def embed_images(self, images: Sequence[np.ndarray]) -> np.ndarray:
        keys = []
        for img in images:
            digest = hashlib.sha1(img.tobytes())
            digest.update(str(img.shape).encode())
            keys.append(("image", digest.hexdigest()))
        return self._lookup(keys, images, self.inner.embed_images)

    def _lookup(self, keys, items, embed_fn) -> np.ndarray:
        with self._lock:
            missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            fresh = embed_fn([items[i] for i in missing])
            with self._lock:
                for row, i in enumerate(missing):
                    self._cache[keys[i]] = fresh[row]
        with self._lock:
            return np.stack([self._cache[k] for k in keys])


def make_provider(
    name: str,
    *,
    endpoint: str | None = None,
    batch_size: int = 32,
    memo: bool = True,
    **kwargs,
) -> EmbeddingProvider:
    """Provider factory for the values accepted by config/CLI."""
    if name == "mock":
        provider: EmbeddingProvider = MockProvider()
    elif name == "remote":
        if not endpoint:
            raise ValueError("remote provider requires an endpoint")
        provider = RemoteProvider(endpoint, batch_size=batch_size, **kwargs)
    else:
        raise ValueError(f"unknown provider {name!r}")
    return MemoProvider(provider) if memo else provider
