"""Pretrained word-vector table with cosine geometry helpers."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)


def cosine(u, v) -> float:
    """Cosine similarity of two same-length vectors.

    Raises
    ------
    ValueError
        If the vectors differ in length or either has zero norm (the angle
        is undefined).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def gate(similarity: float, t_min: float) -> float:
    """Threshold gating: the value passes iff it reaches ``t_min`` (inclusive)."""
    return similarity if similarity >= t_min else 0.0


class EmbeddingTable:
    """Immutable word -> vector lookup over a dense float matrix."""

    def __init__(self, words: list[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
        if len(words) != matrix.shape[0]:
            raise ValueError(f"{len(words)} words but {matrix.shape[0]} rows")
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in embedding table")
        if not np.isfinite(matrix).all():
            raise ValueError("embedding matrix contains NaN or Inf")
        norms = np.linalg.norm(matrix, axis=1)
        if (norms == 0.0).any():
            bad = [w for w, n in zip(words, norms) if n == 0.0]
            raise ValueError(f"zero-norm embedding vector(s): {bad[:5]}")
        self.words = list(words)
        self.matrix = matrix
        self.index = {w: i for i, w in enumerate(self.words)}
        self.unit_matrix = matrix / norms[:, None]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.matrix[self.index[word]]
        except KeyError:
            raise KeyError(f"word not in embedding vocabulary: {word!r}") from None

    def unit_vector(self, word: str) -> np.ndarray:
        try:
            return self.unit_matrix[self.index[word]]
        except KeyError:
            raise KeyError(f"word not in embedding vocabulary: {word!r}") from None

    def similarity(self, a: str, b: str) -> float:
        return float(np.dot(self.unit_vector(a), self.unit_vector(b)))

    def nearest(self, word: str, k: int = 10) -> list[tuple[str, float]]:
        """The ``k`` vocabulary words most cosine-similar to ``word``."""
        sims = self.unit_matrix @ self.unit_vector(word)
        sims[self.index[word]] = -np.inf
        k = min(k, len(self.words) - 1)
        top = np.argpartition(sims, -k)[-k:]
        top = top[np.argsort(sims[top])[::-1]]
        return [(self.words[i], float(sims[i])) for i in top]

    def restrict(self, vocabulary) -> "EmbeddingTable":
        """A sub-table over the given vocabulary, original order preserved."""
        keep = [i for i, w in enumerate(self.words) if w in vocabulary]
        if not keep:
            raise ValueError("restriction leaves an empty embedding table")
        return EmbeddingTable([self.words[i] for i in keep], self.matrix[keep])


def nearest_concept_word(
    doc_tokens: Iterable[str],
    concept: np.ndarray,
    table: EmbeddingTable,
) -> tuple[str, float] | None:
    """The in-vocabulary token most cosine-similar to a concept vector.

    Out-of-vocabulary tokens are skipped; if none remain, returns ``None``.
    Exact similarity ties go to the lexicographically smallest word, so the
    result is deterministic regardless of token order.
    """
    concept = np.asarray(concept, dtype=np.float64)
    norm = np.linalg.norm(concept)
    if norm == 0.0:
        raise ValueError("concept vector has zero norm")
    unit = concept / norm

    best: tuple[str, float] | None = None
    for word in sorted(set(doc_tokens)):
        if word not in table:
            continue
        sim = float(np.dot(table.unit_vector(word), unit))
        if best is None or sim > best[1]:
            best = (word, sim)
    return best


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingTable:
    """Load a text embedding file: optional ``count dim`` header, then one
    ``word v1 v2 ...`` row per line.

    Rows with a mismatched width, non-numeric or non-finite values, zero
    norm, or a repeated word are skipped with a warning naming the line; the
    first occurrence of a duplicate word wins.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = expected_dim
    skipped = 0

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # size header
                except ValueError:
                    pass
            if len(parts) < 2 or not parts[0]:
                if line.strip():
                    log.warning("embedding line %d malformed, skipping", lineno)
                    skipped += 1
                continue
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:] if x], dtype=np.float64)
            except ValueError:
                log.warning("embedding line %d has non-numeric values, skipping", lineno)
                skipped += 1
                continue
            if dim is None:
                dim = vec.shape[0]
            if vec.shape[0] != dim:
                log.warning(
                    "embedding line %d has %d values, expected %d; skipping",
                    lineno, vec.shape[0], dim,
                )
                skipped += 1
                continue
            if not np.isfinite(vec).all():
                log.warning("embedding line %d has non-finite values, skipping", lineno)
                skipped += 1
                continue
            if not vec.any():
                log.warning("zero-norm vector for %r at line %d, word excluded", word, lineno)
                skipped += 1
                continue
            if word in seen:
                log.warning("duplicate embedding for %r at line %d, keeping first", word, lineno)
                skipped += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)

    if not words:
        raise ValueError(f"no usable embedding rows in {path}")
    if skipped:
        log.warning("skipped %d embedding line(s)", skipped)
    return EmbeddingTable(words, np.vstack(rows))
