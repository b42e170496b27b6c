"""Text embedding backends: offline feature hashing and a remote client.

The hash backend is a pure function of (text, dimension): character
trigrams over a boundary-padded string plus token bigrams, signed-hashed
into d buckets, presence-weighted, then L2-normalized. It is order
sensitive through the bigrams and exactly reproducible everywhere.

The remote backend speaks `POST /embed {"texts": [...]}` and retries
transient failures with exponential backoff.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import requests

from .core import EmbedderSpec, PromptContext
from .errors import EmbeddingError, RemoteServiceError

# boundary sentinels for padding; control chars cannot appear in real text
_BOS = "\x02"
_EOS = "\x03"
_SEP = "\x1f"

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.1


@dataclass(frozen=True)
class EmbeddingVector:
    """A unit-norm d-vector. Wraps a read-only float64 array."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise EmbeddingError("embedding must be a non-empty 1-d vector")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > 1e-6:
            raise EmbeddingError("embedding must be unit-normalized")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return int(self.values.shape[0])

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.values.astype(dtype)
        return self.values

    def __len__(self):
        return self.d


def _unit(values, context: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise EmbeddingError("%s: expected a 1-d vector" % context)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise EmbeddingError("%s: zero-norm vector" % context)
    return arr / norm


def _features(text: str):
    """Distinct hashed features: char trigrams + token bigrams, namespaced."""
    padded = _BOS + text + _EOS
    grams = set()
    for i in range(len(padded) - 2):
        grams.add("C" + _SEP + padded[i : i + 3])
    tokens = [_BOS, *text.split(), _EOS]
    for a, b in zip(tokens, tokens[1:]):
        grams.add("B" + _SEP + a + _SEP + b)
    return grams


class HashEmbedder:
    """Deterministic signed feature-hash embedder.

    Presence-based: repeated grams count once, so texts with identical gram
    sets embed identically. Memoizes by exact input text.
    """

    def __init__(self, dim: int = 256):
        if dim < 16:
            raise EmbeddingError("hash embedder needs dim >= 16")
        self.dim = int(dim)
        self._memo: dict = {}

    def embed_one(self, text: str) -> EmbeddingVector:
        if not isinstance(text, str) or not text:
            raise EmbeddingError("cannot embed empty text")
        hit = self._memo.get(text)
        if hit is not None:
            return hit
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram in _features(text):
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "big")
            sign = 1.0 if h >> 63 & 1 == 0 else -1.0
            vec[h % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise EmbeddingError("hashed features cancelled to a zero vector")
        out = EmbeddingVector(vec / norm)
        self._memo[text] = out
        return out

    def embed(self, texts) -> list:
        return [self.embed_one(t) for t in texts]


class RemoteEmbedder:
    """Client for a `POST /embed` service with bounded retries."""

    def __init__(self, endpoint: str, timeout: float = 5.0, max_batch: int = 32,
                 session=None):
        if not endpoint:
            raise EmbeddingError("remote embedder needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_batch = max(1, int(max_batch))
        self._session = session or requests.Session()
        self._memo: dict = {}

    def _post_batch(self, batch) -> list:
        last_error = None
        for attempt in range(1, RETRY_ATTEMPTS + 1):
            try:
                resp = self._session.post(
                    self.endpoint + "/embed",
                    json={"texts": list(batch)},
                    timeout=self.timeout,
                )
                if resp.status_code != 200:
                    raise EmbeddingError("HTTP %d from embed service" % resp.status_code)
                body = resp.json()
                vectors = body.get("embeddings")
                if not isinstance(vectors, list) or len(vectors) != len(batch):
                    raise EmbeddingError(
                        "embed service returned %s vectors for %d texts"
                        % (len(vectors) if isinstance(vectors, list) else "no", len(batch))
                    )
                return vectors
            except Exception as exc:
                last_error = exc
                if attempt < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BASE_DELAY * 2 ** (attempt - 1))
        raise RemoteServiceError(
            "embed request failed: %s" % last_error, attempts=RETRY_ATTEMPTS
        )

    def embed(self, texts) -> list:
        for t in texts:
            if not isinstance(t, str) or not t:
                raise EmbeddingError("cannot embed empty text")
        missing = [t for t in dict.fromkeys(texts) if t not in self._memo]
        for start in range(0, len(missing), self.max_batch):
            batch = missing[start : start + self.max_batch]
            vectors = self._post_batch(batch)
            for text, raw in zip(batch, vectors):
                self._memo[text] = EmbeddingVector(_unit(raw, "embed response"))
        return [self._memo[t] for t in texts]

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed([text])[0]


def offline_forced() -> bool:
    """True when TOOL_OFFLINE=1 pins every backend to its offline variant."""
    return os.environ.get("TOOL_OFFLINE") == "1"


def build_embedder(spec: EmbedderSpec):
    """Instantiate the embedder described by the spec.

    TOOL_OFFLINE=1 overrides remote specs with the hash backend.
    """
    if spec.kind == "hash" or offline_forced():
        return HashEmbedder(dim=spec.dim)
    return RemoteEmbedder(
        endpoint=spec.endpoint, timeout=spec.timeout, max_batch=spec.max_batch
    )


def _resolve(embedder_or_spec):
    if isinstance(embedder_or_spec, EmbedderSpec):
        return build_embedder(embedder_or_spec)
    return embedder_or_spec


def embed_texts(embedder_or_spec, texts) -> list:
    """Embed a non-empty list of non-empty texts, order-preserving."""
    if not texts:
        raise EmbeddingError("need at least one text")
    return _resolve(embedder_or_spec).embed(list(texts))


def embed_with_context(
    embedder_or_spec,
    context: Optional[PromptContext],
    sample_tokens,
    drop_index: Optional[int] = None,
) -> EmbeddingVector:
    """Embed a token sequence under a prompt, optionally dropping one word.

    Args:
        context: prompt wrapper, or None for the bare sentence.
        sample_tokens: the sentence's word tokens.
        drop_index: word position to remove before embedding.

    Raises:
        EmbeddingError: empty tokens, out-of-range index, or a drop that
            would empty a one-word sentence.
    """
    tokens = list(sample_tokens)
    if not tokens:
        raise EmbeddingError("sample has no tokens")
    if drop_index is not None:
        if not 0 <= drop_index < len(tokens):
            raise EmbeddingError(
                "drop_index %d out of range for %d tokens" % (drop_index, len(tokens))
            )
        if len(tokens) == 1:
            raise EmbeddingError("cannot drop the only word of a sentence")
        tokens = tokens[:drop_index] + tokens[drop_index + 1 :]
    sentence = " ".join(tokens)
    rendered = context.rendered(sentence) if context is not None else sentence
    embedder = _resolve(embedder_or_spec)
    return embedder.embed([rendered])[0]
