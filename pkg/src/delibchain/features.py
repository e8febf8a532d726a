"""Numeric representations of utterances and utterance pairs.

Three similarity families back the untrained baselines (character-level
indel ratio, task-entity IoU, embedding cosine), and the pair vector
``[v_ctx, v_p, v_c, v_p ⊙ v_c]`` feeds the joint scorer. Embeddings come
from pluggable providers; the default hashes bag-of-words counts into a
fixed number of buckets, which keeps the whole pipeline deterministic
and dependency-free while leaving room to inject precomputed vectors
from a lookup file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import ConfigError, DataValidationError
from .pairs import PairText, tokenize

DEFAULT_EMBED_DIM = 256

_DELI_VOWELS = set("aeou")  # "i" is skipped: it reads as the pronoun
_WTD_COLORS = {"red", "blue", "green", "purple", "yellow"}
_WTD_WEIGHTS = {str(w) for w in range(10, 110, 10)}

ENTITY_SCHEMAS = {
    "delidata": ("vowels", "consonants", "even", "odd"),
    "wtd": ("red", "blue", "green", "purple", "yellow", "weight"),
}


def lexical_ratio(a: str, b: str) -> float:
    """Indel-based similarity ratio on a 0..100 scale.

    Insertions and deletions cost 1, substitution is not allowed (an
    edit that substitutes costs 2), so the distance equals
    ``len(a) + len(b) - 2 * LCS(a, b)`` and the ratio is
    ``(1 - distance / (len(a) + len(b))) * 100``. Symmetric; 100 iff the
    strings are equal (two empty strings count as equal).
    """
    if not a and not b:
        return 100.0
    total = len(a) + len(b)
    return (1.0 - _indel_distance(a, b) / total) * 100.0


def _indel_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    # One-row LCS over numpy codepoint arrays.
    a_codes = np.frombuffer(a.encode("utf-32-le"), dtype=np.uint32)
    b_codes = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    previous = np.zeros(len(b_codes) + 1, dtype=np.int64)
    current = np.zeros_like(previous)
    for ch in a_codes:
        match = previous[:-1] + (b_codes == ch)
        np.maximum.accumulate(np.maximum(match, previous[1:]), out=current[1:])
        # accumulate handles the current[:j] dependency: current[j] =
        # max(match[j-1], previous[j], current[j-1])
        previous, current = current, previous
    lcs = int(previous[-1])
    return len(a) + len(b) - 2 * lcs


@dataclass(frozen=True)
class CategoryCounts:
    counts: dict[str, int]
    schema: str

    def total(self) -> int:
        return sum(self.counts.values())


def extract_entities(text: str, schema: str) -> CategoryCounts:
    """Count task-relevant category mentions in one utterance.

    delidata: single-letter tokens split into vowels/consonants and
    digit tokens into even/odd. wtd: the five block colors plus weight
    values (multiples of ten up to 100).
    """
    if schema not in ENTITY_SCHEMAS:
        raise ConfigError(f"unknown entity schema {schema!r}")
    counts: dict[str, int] = {}

    def bump(key: str) -> None:
        counts[key] = counts.get(key, 0) + 1

    for token in tokenize(text):
        if schema == "delidata":
            if len(token) == 1 and token.isalpha():
                if token == "i":
                    continue
                bump("vowels" if token in _DELI_VOWELS else "consonants")
            elif token.isdigit():
                bump("even" if int(token) % 2 == 0 else "odd")
        else:
            if token in _WTD_COLORS:
                bump(token)
            elif token in _WTD_WEIGHTS:
                bump("weight")
    return CategoryCounts(counts=counts, schema=schema)


def entity_iou(a: CategoryCounts, b: CategoryCounts) -> float:
    """Multiset intersection-over-union of two entity count maps.

    Two empty maps score 0 (no evidence of relatedness).
    """
    if a.schema != b.schema:
        raise DataValidationError(f"schema mismatch: {a.schema!r} vs {b.schema!r}")
    keys = set(a.counts) | set(b.counts)
    minima = sum(min(a.counts.get(k, 0), b.counts.get(k, 0)) for k in keys)
    maxima = sum(max(a.counts.get(k, 0), b.counts.get(k, 0)) for k in keys)
    if maxima == 0:
        return 0.0
    return minima / maxima


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def _stable_bucket(token: str, dimension: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dimension


class HashedBowProvider:
    """Token-hashing bag-of-words embedder, L2-normalized.

    Stable across processes: bucket assignment uses blake2b, not the
    salted builtin hash.
    """

    def __init__(self, dimension: int = DEFAULT_EMBED_DIM):
        if dimension < 8:
            raise ConfigError("embedding dimension must be >= 8")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            vec[_stable_bucket(token, self.dimension)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec


class FileEmbeddingProvider:
    """Exact-lookup provider over a key → vector file.

    One record per line: the key, a tab, then space-separated floats.
    All vectors must share one dimension; lookups of unknown keys fail
    loudly rather than falling back.
    """

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int):
        self.vectors = vectors
        self.dimension = dimension

    @classmethod
    def from_file(cls, path: str | Path) -> "FileEmbeddingProvider":
        vectors: dict[str, np.ndarray] = {}
        dimension: int | None = None
        with Path(path).open(encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                raw = raw.rstrip("\n")
                if not raw:
                    continue
                key, _, payload = raw.partition("\t")
                if not payload:
                    raise DataValidationError(f"{path}:{lineno}: missing vector payload")
                vec = np.array([float(x) for x in payload.split()], dtype=np.float64)
                if not np.isfinite(vec).all():
                    raise DataValidationError(f"{path}:{lineno}: non-finite components")
                if dimension is None:
                    dimension = vec.size
                elif vec.size != dimension:
                    raise DataValidationError(
                        f"{path}:{lineno}: dimension {vec.size} != {dimension}"
                    )
                vectors[key] = vec
        if dimension is None:
            raise DataValidationError(f"{path}: no vectors found")
        return cls(vectors=vectors, dimension=dimension)

    def embed(self, text: str) -> np.ndarray:
        try:
            return self.vectors[text]
        except KeyError:
            raise DataValidationError(f"no stored embedding for key {text!r}") from None


def file_embed_provider(path: str | Path) -> FileEmbeddingProvider:
    return FileEmbeddingProvider.from_file(path)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)


@dataclass(frozen=True)
class PairFeature:
    """Combined representation [v_ctx, v_p, v_c, v_p ⊙ v_c] of a pair.

    v_p embeds the consequent (probing-candidate) span, v_c the
    antecedent (causal-candidate) span, and v_ctx the full rendered
    context around them.
    """

    v_ctx: np.ndarray
    v_p: np.ndarray
    v_c: np.ndarray
    v_had: np.ndarray = field(init=False)
    concatenated: np.ndarray = field(init=False)

    def __post_init__(self):
        had = self.v_p * self.v_c
        object.__setattr__(self, "v_had", had)
        object.__setattr__(
            self, "concatenated", np.concatenate([self.v_ctx, self.v_p, self.v_c, had])
        )


def pair_feature(pair_text: PairText, provider: EmbeddingProvider) -> PairFeature:
    return PairFeature(
        v_ctx=provider.embed(pair_text.context_text),
        v_p=provider.embed(pair_text.span_j_text),
        v_c=provider.embed(pair_text.span_i_text),
    )
