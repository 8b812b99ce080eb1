"""Per-window hallucination scores: semantic entropy, lexical entropy, frequency.

All entropies use the natural log and are normalized to [0, 1] before being
combined, so the final score is comparable against thresholds in [0, 1].
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .datamodel import DetectionConfig
from .errors import ProviderError, ScoringError
from .matcher import MatchSet
from .segmenter import WindowSpan

log = logging.getLogger(__name__)


class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not math.isfinite(norm):
        raise ProviderError("embedding has zero or non-finite norm")
    return vec / norm


class StubEmbeddingProvider:
    """Offline provider: hashed character-trigram histograms, L2-normalized.

    Texts are padded with one space on each side so word edges produce
    trigrams of their own. Hashing uses keyed BLAKE2b, so vectors do not
    depend on ``PYTHONHASHSEED``.
    """

    name = "stub-trigram"

    def __init__(self, dimension: int = 256, seed: bytes = b"halluspan"):
        if dimension < 8:
            raise ValueError(f"dimension must be >= 8, got {dimension}")
        self.dimension = dimension
        self._key = seed
        self._bucket_cache: dict[str, int] = {}

    def _bucket(self, gram: str) -> int:
        idx = self._bucket_cache.get(gram)
        if idx is None:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=self._key).digest()
            idx = self._bucket_cache[gram] = int.from_bytes(digest, "little") % self.dimension
        return idx

    def embed(self, text: str) -> np.ndarray:
        padded = f" {text} "
        grams = [padded[i : i + 3] for i in range(len(padded) - 2)] or [padded]
        vec = np.zeros(self.dimension)
        for gram in grams:
            vec[self._bucket(gram)] += 1.0
        return _normalize(vec)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


def deterministic_stub_provider(dimension: int = 256) -> StubEmbeddingProvider:
    return StubEmbeddingProvider(dimension)


class RemoteEmbeddingProvider:
    """Client for an HTTP embedding endpoint.

    Sends ``{"model": ..., "input": [...]}`` and accepts either an
    OpenAI-style ``{"data": [{"embedding": [...], "index": i}]}`` body or
    ``{"embeddings": [[...], ...]}``. Vectors are L2-normalized on receipt.
    """

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        model: str | None = None,
        timeout: float = 30.0,
        batch_size: int = 256,
        client=None,
    ):
        import httpx

        self.url = url or os.environ.get("HALLUSPAN_EMBEDDING_URL")
        if not self.url:
            raise ProviderError("no embedding endpoint: pass url or set HALLUSPAN_EMBEDDING_URL")
        self.token = token if token is not None else os.environ.get("HALLUSPAN_EMBEDDING_TOKEN")
        self.model = model or os.environ.get("HALLUSPAN_EMBEDDING_MODEL", "")
        self.name = f"remote:{self.model or self.url}"
        self.batch_size = batch_size
        self.dimension: int | None = None
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, texts: list[str]) -> list[np.ndarray]:
        import httpx

        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        payload = {"input": texts}
        if self.model:
            payload["model"] = self.model
        try:
            resp = self._client.post(self.url, json=payload, headers=headers)
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if isinstance(body.get("data"), list):
            items = sorted(body["data"], key=lambda d: d.get("index", 0))
            raw = [item["embedding"] for item in items]
        elif isinstance(body.get("embeddings"), list):
            raw = body["embeddings"]
        else:
            raise ProviderError("embedding response has neither 'data' nor 'embeddings'")
        if len(raw) != len(texts):
            raise ProviderError(f"asked for {len(texts)} embeddings, got {len(raw)}")
        vecs = [_normalize(np.asarray(v, dtype=float)) for v in raw]
        for v in vecs:
            if self.dimension is None:
                self.dimension = v.shape[0]
            elif v.shape != (self.dimension,):
                raise ProviderError(f"embedding dimension changed from {self.dimension} to {v.shape}")
        return vecs

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        texts = list(texts)
        out: list[np.ndarray] = []
        for i in range(0, len(texts), self.batch_size):
            out.extend(self._post(texts[i : i + self.batch_size]))
        return out


@dataclass(frozen=True)
class ComponentScores:
    window: WindowSpan
    semantic: float
    semantic_norm: float
    lexical: float
    lexical_norm: float
    frequency: float
    score: float


def softmax(logits: Sequence[float]) -> np.ndarray:
    x = np.asarray(logits, dtype=float)
    if x.size == 0:
        return x
    e = np.exp(x - x.max())
    return e / e.sum()


def shannon_entropy(probs: Sequence[float]) -> float:
    return float(-sum(p * math.log(p) for p in probs if p > 0.0))


def _clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def semantic_entropy_from_vectors(anchor: np.ndarray, matched: Sequence[np.ndarray]) -> tuple[float, float]:
    """Raw and normalized entropy of the softmax over cosine similarities."""
    k = len(matched)
    if k == 0:
        return 0.0, 1.0
    if k == 1:
        return 0.0, 0.0
    a = np.asarray(anchor, dtype=float)
    m = np.asarray(matched, dtype=float)
    sims = (m @ a) / (np.linalg.norm(m, axis=1) * np.linalg.norm(a))
    h = shannon_entropy(softmax(sims))
    return h, _clip01(h / math.log(k))


def semantic_entropy(win: WindowSpan, m: MatchSet, provider: EmbeddingProvider) -> tuple[float, float]:
    if len(m) < 2:
        return semantic_entropy_from_vectors(None, [None] * len(m))
    texts = [win.text] + [match.window.text for match in m.matches]
    try:
        vecs = provider.embed_batch(texts)
    except Exception as exc:
        raise ScoringError(f"embedding failed for window {win.start}-{win.end}: {exc}", win) from exc
    return semantic_entropy_from_vectors(vecs[0], vecs[1:])


def canonical_text(text: str) -> str:
    return " ".join(text.casefold().split())


def lexical_entropy(m: MatchSet) -> tuple[float, float]:
    """Raw and normalized entropy of the matched spans' surface forms."""
    if len(m) == 0:
        return 0.0, 1.0
    counts = Counter(canonical_text(match.window.text) for match in m.matches)
    if len(counts) == 1:
        return 0.0, 0.0
    total = sum(counts.values())
    h = shannon_entropy([c / total for c in counts.values()])
    return h, _clip01(h / math.log(len(counts)))


def frequency_score(m: MatchSet, n: int) -> float:
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return _clip01(1.0 - m.matched_sample_count / n)


def combined_score(semantic_norm: float, lexical_norm: float, frequency: float, cfg: DetectionConfig) -> float:
    return cfg.alpha * semantic_norm + cfg.beta * lexical_norm + cfg.gamma * frequency


def score_window(
    m: MatchSet,
    n: int,
    cfg: DetectionConfig,
    vectors: dict[str, np.ndarray] | None = None,
    provider: EmbeddingProvider | None = None,
) -> ComponentScores:
    """Score one window from its match set.

    Embeddings come from ``vectors`` (text -> vector) when given, otherwise
    from ``provider``.
    """
    win = m.source
    if vectors is not None and len(m) >= 2:
        try:
            anchor = vectors[win.text]
            matched = [vectors[match.window.text] for match in m.matches]
        except KeyError as exc:
            raise ScoringError(f"no embedding for window {win.start}-{win.end}", win) from exc
        hs, hs_norm = semantic_entropy_from_vectors(anchor, matched)
    elif provider is not None or len(m) < 2:
        hs, hs_norm = semantic_entropy(win, m, provider)
    else:
        raise ScoringError("no embeddings available", win)
    hl, hl_norm = lexical_entropy(m)
    f = frequency_score(m, n)
    return ComponentScores(win, hs, hs_norm, hl, hl_norm, f, combined_score(hs_norm, hl_norm, f, cfg))


def embed_texts(texts: Sequence[str], provider: EmbeddingProvider) -> dict[str, np.ndarray]:
    """Embed the distinct ``texts`` in one provider call."""
    unique = list(dict.fromkeys(texts))
    if not unique:
        return {}
    try:
        vecs = provider.embed_batch(unique)
    except Exception as exc:
        raise ScoringError(f"embedding provider {getattr(provider, 'name', '?')} failed: {exc}") from exc
    if len(vecs) != len(unique):
        raise ScoringError(f"provider returned {len(vecs)} vectors for {len(unique)} texts")
    return dict(zip(unique, vecs))
