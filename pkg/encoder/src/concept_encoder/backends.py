"""Encoder backends behind one interface: encode(texts) -> (n, dim) float64.

Model ids select the backend:

  "all-MiniLM-L6-v2" or "st:<id>"  sentence-transformers checkpoint
                                   (needs the model available locally or
                                   a reachable hub)
  "hash:<dim>"                     deterministic token-hashing featurizer,
                                   dependency-free and fully offline;
                                   meant for CI and plumbing tests

Both are deterministic in inference; the hashing backend is additionally
stable across machines for a pinned numpy.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncoderError


class HashingBackend:
    """Bag of hashed tokens and character trigrams, L2-normalized.

    No semantics beyond lexical overlap, but overlap is exactly what the
    exporter's contract tests need (shared words raise cosine).
    """

    def __init__(self, dim: int):
        if dim < 8:
            raise EncoderError(f"hash backend dimension too small: {dim}")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _feature(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            vec = rng.standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            tokens = [t for t in _tokenize(text)]
            if not tokens:
                raise EncoderError(f"no encodable tokens in {text!r}")
            acc = np.zeros(self.dim)
            for token in tokens:
                acc += self._feature(token)
                padded = f"^{token}$"
                for k in range(len(padded) - 2):
                    acc += 0.5 * self._feature(padded[k:k + 3])
            out[row] = acc / np.linalg.norm(acc)
        return out


def _tokenize(text: str) -> list[str]:
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


class SentenceTransformerBackend:
    """Wraps a sentence-transformers checkpoint (inference only)."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(f"sentence-transformers not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderError(f"cannot load encoder {model_id!r}: {exc}") from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        vecs = self._model.encode(texts, convert_to_numpy=True,
                                  show_progress_bar=False)
        return np.asarray(vecs, dtype=np.float64)


def load_backend(model_id: str):
    if model_id.startswith("hash:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError:
            raise EncoderError(f"bad hash backend spec: {model_id!r}") from None
        return HashingBackend(dim)
    if model_id.startswith("st:"):
        return SentenceTransformerBackend(model_id.split(":", 1)[1])
    if ":" in model_id:
        raise EncoderError(f"unknown encoder scheme: {model_id!r}")
    return SentenceTransformerBackend(model_id)
