"""Desk-scale sentence encoder: hashed n-gram features + trainable linear embedding.

Stands in for a pretrained sentence transformer. Texts are whitespace
tokenized (512-token cap by default), featurized as word unigrams plus
character n-grams hashed with FNV-1a 64 into a fixed number of buckets,
then projected by a trainable matrix and L2-normalized. Feature hashing
needs no fitting pass and is bit-identical across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import fnv1a64, uniform_array

# Character n-grams are computed per token with these boundary markers, so
# word-initial and word-final grams hash differently from interior ones.
BOUNDARY_LEFT = "‹"  # single left-pointing angle quote
BOUNDARY_RIGHT = "›"

DEFAULT_HASH_DIM = 32768
DEFAULT_EMBED_DIM = 64


@dataclass(frozen=True)
class TokenizerConfig:
    max_seq_len: int = 512
    lowercase: bool = True
    char_ngram_min: int = 3
    char_ngram_max: int = 5

    def __post_init__(self):
        if self.max_seq_len < 1:
            raise ValueError(f"max_seq_len must be >= 1, got {self.max_seq_len}")
        if self.char_ngram_min > self.char_ngram_max:
            raise ValueError(
                f"char_ngram_min {self.char_ngram_min} exceeds char_ngram_max {self.char_ngram_max}"
            )
        if self.char_ngram_min < 1:
            raise ValueError("char_ngram_min must be >= 1")


@dataclass
class EncoderModel:
    """Hashed-feature config plus the trainable projection matrix W.

    W has shape (hash_dim, embed_dim); embeddings are W^T x for a sparse
    feature-count vector x, L2-normalized. Mutable only during training.
    """

    tokenizer: TokenizerConfig
    hash_dim: int
    embed_dim: int
    W: np.ndarray
    init_seed: int

    def __post_init__(self):
        if self.hash_dim < 2 or (self.hash_dim & (self.hash_dim - 1)) != 0:
            raise ValueError(f"hash_dim must be a power of two >= 2, got {self.hash_dim}")
        if self.embed_dim < 2:
            raise ValueError(f"embed_dim must be >= 2, got {self.embed_dim}")
        if self.W.shape != (self.hash_dim, self.embed_dim):
            raise ValueError(
                f"W shape {self.W.shape} does not match (hash_dim, embed_dim)="
                f"({self.hash_dim}, {self.embed_dim})"
            )
        if not np.isfinite(self.W).all():
            raise ValueError("W contains non-finite entries")


def tokenize(cfg: TokenizerConfig, text: str) -> list[str]:
    """Whitespace tokens, lowercased when configured, capped at max_seq_len."""
    if cfg.lowercase:
        text = text.lower()
    return text.split()[: cfg.max_seq_len]


def featurize(cfg: TokenizerConfig, hash_dim: int, text: str) -> dict[int, float]:
    """Sparse feature counts for a text: bucket index -> count.

    Features are the word unigrams plus, per token, the character n-grams
    of sizes char_ngram_min..char_ngram_max over the boundary-marked token.
    Each feature string is hashed with FNV-1a 64 over its UTF-8 bytes and
    bucketed modulo hash_dim.
    """
    if hash_dim < 2:
        raise ValueError(f"hash_dim must be >= 2, got {hash_dim}")
    counts: dict[int, float] = {}
    for token in tokenize(cfg, text):
        _bump(counts, token, hash_dim)
        marked = BOUNDARY_LEFT + token + BOUNDARY_RIGHT
        for n in range(cfg.char_ngram_min, cfg.char_ngram_max + 1):
            if n > len(marked):
                break
            for i in range(len(marked) - n + 1):
                _bump(counts, marked[i : i + n], hash_dim)
    return counts


def _bump(counts: dict[int, float], feature: str, hash_dim: int) -> None:
    idx = fnv1a64(feature.encode("utf-8")) % hash_dim
    counts[idx] = counts.get(idx, 0.0) + 1.0


def feature_arrays(feats: dict[int, float]) -> tuple[np.ndarray, np.ndarray]:
    """Split a sparse count dict into aligned (indices, values) arrays."""
    idx = np.fromiter(feats.keys(), dtype=np.int64, count=len(feats))
    val = np.fromiter(feats.values(), dtype=np.float64, count=len(feats))
    return idx, val


def init_encoder(
    cfg: TokenizerConfig | None = None,
    hash_dim: int = DEFAULT_HASH_DIM,
    embed_dim: int = DEFAULT_EMBED_DIM,
    seed: int = 0,
) -> EncoderModel:
    """Fresh encoder with W ~ Uniform[-1/sqrt(embed_dim), +1/sqrt(embed_dim)].

    Entries are drawn row-major from SplitMix64(seed), so the same seed
    reproduces W bit-for-bit.
    """
    if cfg is None:
        cfg = TokenizerConfig()
    if embed_dim < 2:
        raise ValueError(f"embed_dim must be >= 2, got {embed_dim}")
    bound = 1.0 / np.sqrt(embed_dim)
    flat = uniform_array(seed, hash_dim * embed_dim, low=-bound, high=bound)
    W = flat.reshape(hash_dim, embed_dim)
    return EncoderModel(tokenizer=cfg, hash_dim=hash_dim, embed_dim=embed_dim, W=W, init_seed=seed)


def embed(m: EncoderModel, text: str) -> np.ndarray:
    """Unit-norm sentence vector for a text; the zero vector for feature-less text."""
    feats = featurize(m.tokenizer, m.hash_dim, text)
    return embed_features(m.W, feats)


def embed_features(W: np.ndarray, feats: dict[int, float]) -> np.ndarray:
    if not feats:
        return np.zeros(W.shape[1])
    idx, val = feature_arrays(feats)
    return _normalize(val @ W[idx])


def embed_many(m: EncoderModel, texts: Sequence[str]) -> np.ndarray:
    """Stacked embeddings, one row per text."""
    return np.stack([embed(m, t) for t in texts]) if texts else np.zeros((0, m.embed_dim))


def _normalize(u: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        return np.zeros_like(u)
    return u / norm
