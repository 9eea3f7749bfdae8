"""Embedding providers and cosine similarity.

The default provider is a seeded signed-hash bag-of-words: each token is
hashed into one of `dimension` buckets with a +/-1 sign, the bucket sums
are L2-normalized. It is fully deterministic and needs no model assets. A
TF-IDF vector provider (fitted on a corpus) and an external HTTP provider
(one-endpoint JSON protocol) share the same surface.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .textprep import PrepConfig, TokenizedDoc, preprocess_text


class ProviderError(RuntimeError):
    """Embedding backend unavailable or returned a malformed response."""


@dataclass
class EmbeddingVector:
    values: np.ndarray
    norm: float

    @classmethod
    def wrap(cls, values: np.ndarray) -> "EmbeddingVector":
        values = np.asarray(values, dtype=np.float64)
        return cls(values=values, norm=float(np.sqrt(np.dot(values, values))))

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product over the product of Euclidean norms, clamped to [-1, 1].

    Returns 0.0 when either vector has zero norm.
    """
    if a.dimension != b.dimension:
        raise ValueError(f"dimension mismatch: {a.dimension} != {b.dimension}")
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    value = float(np.dot(a.values, b.values)) / (a.norm * b.norm)
    return max(-1.0, min(1.0, value))


class HashedBowProvider:
    """Signed-hash bag-of-words embeddings, L2-normalized."""

    kind = "hashed-bow"

    def __init__(self, dimension: int = 4096, seed: int = 0, prep: Optional[PrepConfig] = None):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self.prep = prep or PrepConfig()
        self._key = seed.to_bytes(8, "little", signed=True)
        self._bucket_cache: Dict[str, tuple] = {}

    def _bucket(self, token: str) -> tuple:
        cached = self._bucket_cache.get(token)
        if cached is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
            h = int.from_bytes(digest, "little")
            cached = ((h >> 1) % self.dimension, 1.0 if h & 1 else -1.0)
            self._bucket_cache[token] = cached
        return cached

    def embed_tokens(self, tokens: Sequence[str]) -> EmbeddingVector:
        values = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            idx, sign = self._bucket(token)
            values[idx] += sign
        norm = math.sqrt(float(np.dot(values, values)))
        if norm > 0.0:
            values /= norm
        return EmbeddingVector.wrap(values)

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_tokens(preprocess_text(text, self.prep).tokens)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, "seed": self.seed,
                "prep": self.prep.to_dict()}


class TfidfVectorProvider:
    """TF-IDF document vectors over a vocabulary fitted from a corpus.

    idf uses the smoothed form ln((1+N)/(1+df)) + 1; vectors are
    L2-normalized. Out-of-vocabulary tokens are ignored.
    """

    kind = "tfidf-vector"

    def __init__(self, prep: Optional[PrepConfig] = None):
        self.prep = prep or PrepConfig()
        self.vocabulary: Dict[str, int] = {}
        self.idf: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    def fit(self, docs: Sequence[TokenizedDoc]) -> "TfidfVectorProvider":
        df: Dict[str, int] = {}
        for doc in docs:
            for token in set(doc.tokens):
                df[token] = df.get(token, 0) + 1
        self.vocabulary = {tok: i for i, tok in enumerate(sorted(df))}
        n_docs = len(docs)
        idf = np.zeros(len(self.vocabulary), dtype=np.float64)
        for tok, i in self.vocabulary.items():
            idf[i] = math.log((1 + n_docs) / (1 + df[tok])) + 1.0
        self.idf = idf
        return self

    def embed_tokens(self, tokens: Sequence[str]) -> EmbeddingVector:
        if self.idf is None:
            raise ProviderError("tfidf-vector provider is not fitted")
        values = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            idx = self.vocabulary.get(token)
            if idx is not None:
                values[idx] += 1.0
        values *= self.idf
        norm = math.sqrt(float(np.dot(values, values)))
        if norm > 0.0:
            values /= norm
        return EmbeddingVector.wrap(values)

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_tokens(preprocess_text(text, self.prep).tokens)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}


class ExternalProvider:
    """Client for the one-endpoint embedding protocol.

    GET  /meta  -> {"dimension": d}
    POST /embed {"texts": [...]} -> {"vectors": [[...], ...]}
    """

    kind = "external"

    def __init__(self, base_url: str, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client()
        try:
            resp = self._client.get(f"{self.base_url}/meta")
            resp.raise_for_status()
            self.dimension = int(resp.json()["dimension"])
        except Exception as exc:
            raise ProviderError(f"embedding handshake with {base_url} failed: {exc}") from exc

    def embed_texts(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        try:
            resp = self._client.post(f"{self.base_url}/embed", json={"texts": list(texts)})
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except Exception as exc:
            raise ProviderError(f"embedding call failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError("embedding service returned wrong vector count")
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ProviderError("embedding service returned wrong dimension")
            out.append(EmbeddingVector.wrap(arr))
        return out

    def embed_text(self, text: str) -> EmbeddingVector:
        return self.embed_texts([text])[0]

    def embed_tokens(self, tokens: Sequence[str]) -> EmbeddingVector:
        return self.embed_text(" ".join(tokens))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "base_url": self.base_url, "dimension": self.dimension}


def embed_text(provider, text: str) -> EmbeddingVector:
    """Embed raw text with any provider."""
    return provider.embed_text(text)


def make_provider(spec: dict, docs: Optional[Sequence[TokenizedDoc]] = None):
    """Build a provider from a config dict (as stored in run manifests)."""
    kind = spec.get("kind", "hashed-bow")
    if kind == "hashed-bow":
        prep = PrepConfig.from_dict(spec["prep"]) if "prep" in spec else None
        return HashedBowProvider(
            dimension=int(spec.get("dimension", 4096)),
            seed=int(spec.get("seed", 0)),
            prep=prep,
        )
    if kind == "tfidf-vector":
        provider = TfidfVectorProvider()
        if docs is not None:
            provider.fit(docs)
        return provider
    if kind == "external":
        return ExternalProvider(spec["base_url"])
    raise ValueError(f"unknown provider kind {kind!r}")
