"""Text-to-unit-vector embedding providers and cosine similarity.

Two providers are shipped: a deterministic feature-hashing embedder for
offline runs and tests, and an HTTP client for remote embedding services.
Every vector leaving this module is L2-normalized.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from abc import ABC, abstractmethod
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import word_tokens
from .errors import DimensionError, EmptyInput, ProviderUnavailable

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A unit-normalized float32 vector with provenance."""

    values: np.ndarray
    dim: int
    provider_id: str

    def __post_init__(self):
        if self.values.shape != (self.dim,):
            raise DimensionError(f"expected shape ({self.dim},), got {self.values.shape}")
        norm = float(np.linalg.norm(self.values.astype(np.float64)))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"vector norm {norm} is not within 1e-6 of 1")
        self.values.setflags(write=False)


def unit_vector(raw: np.ndarray, dim: int, provider_id: str) -> EmbeddingVector:
    """Normalize a raw vector to unit length and wrap it, storing float32."""
    raw64 = np.asarray(raw, dtype=np.float64)
    norm = float(np.linalg.norm(raw64))
    if norm == 0.0:
        raise EmptyInput("cannot normalize an all-zero vector")
    return EmbeddingVector((raw64 / norm).astype(np.float32), dim, provider_id)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of unit vectors, accumulated at 64-bit, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionError(f"dim mismatch: {a.dim} vs {b.dim}")
    score = float(np.dot(a.values.astype(np.float64), b.values.astype(np.float64)))
    return max(-1.0, min(1.0, score))


class EmbeddingProvider(ABC):
    """Deterministic text embedder: same input text, same output vector."""

    provider_id: str
    dim: int

    @abstractmethod
    def embed(self, text: str) -> EmbeddingVector:
        ...

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        """Element i equals embed(texts[i]); order preserved.

        The first failing element aborts the batch with its index attached.
        """
        out = []
        for i, text in enumerate(texts):
            try:
                out.append(self.embed(text))
            except Exception as exc:
                raise type(exc)(f"batch element {i}: {exc}") from exc
        return out


def _splitmix64(state: int) -> list[int]:
    """Four successive splitmix64 outputs seeded by ``state``."""
    words = []
    for _ in range(4):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        words.append(z ^ (z >> 31))
    return words


class HashingEmbedder(EmbeddingProvider):
    """Feature-hashing bag-of-words embedder.

    Each lowercase token is hashed by a fixed 64-bit hash that seeds a
    deterministic +/-1 sign pattern over the full dimension; token patterns
    are summed over the token multiset and L2-normalized. Shared vocabulary
    therefore raises cosine similarity, and two distinct tokens share a
    pattern only when their 64-bit hashes collide.

    ``scale`` multiplies the pre-normalization sum and never changes the
    output vector; it exists so magnitude invariance is testable.
    """

    def __init__(self, dim: int = 256, scale: float = 1.0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.scale = scale
        self.provider_id = f"feature-hash-{dim}"
        self._patterns: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _token_pattern(self, token: str) -> np.ndarray:
        pattern = self._patterns.get(token)
        if pattern is not None:
            return pattern
        seed = int.from_bytes(
            hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big"
        )
        words_needed = (self.dim + 63) // 64
        stream = b""
        state = seed
        while len(stream) < words_needed * 8:
            for word in _splitmix64(state):
                stream += word.to_bytes(8, "little")
            state = (state + 1) & _MASK64
        bits = np.unpackbits(np.frombuffer(stream, dtype=np.uint8), bitorder="little")
        pattern = bits[: self.dim].astype(np.float32) * 2.0 - 1.0
        pattern.setflags(write=False)
        with self._lock:
            self._patterns[token] = pattern
        return pattern

    def raw_vector(self, text: str) -> np.ndarray:
        """Pre-normalization sum of token patterns over the token multiset."""
        tokens = word_tokens(text)
        if not tokens:
            raise EmptyInput("text has no hashable tokens")
        raw = np.zeros(self.dim, dtype=np.float64)
        for token, count in Counter(tokens).items():
            raw += count * self._token_pattern(token).astype(np.float64)
        return raw * self.scale

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise EmptyInput("text is empty")
        return unit_vector(self.raw_vector(text), self.dim, self.provider_id)


class RemoteEmbeddingClient(EmbeddingProvider):
    """HTTP client for embedding services.

    Wire shape: POST ``{"model": ..., "input": [texts]}`` returning
    ``{"data": [{"embedding": [...]}, ...]}`` in input order. Responses are
    normalized to unit length before use. Batches run on a bounded worker
    pool; output order follows input order regardless of completion order.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        timeout: float = 30.0,
        retries: int = 2,
        batch_size: int = 64,
        max_in_flight: int = 4,
        session=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.timeout = timeout
        self.retries = retries
        self.batch_size = max(1, batch_size)
        self.max_in_flight = max(1, max_in_flight)
        self.provider_id = f"remote:{model}"
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def _post_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        payload = {"model": self.model, "input": texts}
        last_error = ""
        for attempt in range(self.retries + 1):
            try:
                response = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
                if response.status_code >= 500:
                    last_error = f"HTTP {response.status_code}"
                    continue
                if response.status_code != 200:
                    raise ProviderUnavailable(
                        f"embedding service returned HTTP {response.status_code}",
                        attempts=attempt + 1,
                        last_error=response.text[:200],
                    )
                body = response.json()
                break
            except ProviderUnavailable:
                raise
            except Exception as exc:
                last_error = str(exc)
        else:
            raise ProviderUnavailable(
                f"embedding service unreachable after {self.retries + 1} attempts",
                attempts=self.retries + 1,
                last_error=last_error,
            )
        data = body.get("data", [])
        if len(data) != len(texts):
            raise ProviderUnavailable(
                f"embedding service returned {len(data)} vectors for {len(texts)} inputs",
                attempts=1,
            )
        vectors = []
        for item in data:
            if item.get("truncated"):
                logger.warning("embedding service reported input truncation")
            values = np.asarray(item["embedding"], dtype=np.float64)
            if values.shape != (self.dim,):
                raise DimensionError(
                    f"service returned dim {values.shape[0]}, expected {self.dim}"
                )
            vectors.append(unit_vector(values, self.dim, self.provider_id))
        return vectors

    def embed(self, text: str) -> EmbeddingVector:
        if not text or not text.strip():
            raise EmptyInput("text is empty")
        return self._post_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[EmbeddingVector]:
        for i, text in enumerate(texts):
            if not text or not text.strip():
                raise EmptyInput(f"batch element {i}: text is empty")
        batches = [texts[i : i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if not batches:
            return []
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            results = list(pool.map(self._post_batch, batches))
        return [vec for batch in results for vec in batch]
