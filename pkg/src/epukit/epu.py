"""Economic policy uncertainty scoring from word embeddings.

A document is scored against three concept words (economy, policy,
uncertainty). Each concept contributes the best cosine similarity reached by
any document word; similarities below a threshold are gated to zero, and the
score is the area of the triangle spanned by the three gated similarities
drawn at 120-degree angles from a common origin.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document
from .embeddings import EmbeddingTable, gate
from .series import MonthlySeries, aggregate_monthly, standardize

DEFAULT_TMIN = 0.5
DEFAULT_SEEDS = ("economy", "policy", "uncertainty")

SQRT3_2 = math.sqrt(3.0) / 2.0


def triangle_vertices(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Vertices of the concept triangle.

    The three similarity values are laid out as spokes at 120-degree angles:
    ``alpha`` straight up, ``beta`` down-right, ``gamma`` down-left.

    Returns
    -------
    ndarray of shape (3, 2)
        Rows are the (x, y) coordinates of the spoke endpoints.
    """
    return np.array(
        [
            [0.0, alpha],
            [SQRT3_2 * beta, -beta / 2.0],
            [-SQRT3_2 * gamma, -gamma / 2.0],
        ]
    )


def triangle_sides(alpha: float, beta: float, gamma: float) -> tuple[float, float, float]:
    """Side lengths of the spoke triangle, from the law of cosines at 120 degrees.

    Returns
    -------
    (l_ab, l_ac, l_bc)
        Distances between the alpha/beta, alpha/gamma and beta/gamma spoke
        endpoints.
    """
    l_ab = math.sqrt(alpha * alpha + beta * beta + alpha * beta)
    l_ac = math.sqrt(alpha * alpha + gamma * gamma + alpha * gamma)
    l_bc = math.sqrt(beta * beta + gamma * gamma + beta * gamma)
    return l_ab, l_ac, l_bc


def triangle_area(alpha: float, beta: float, gamma: float) -> float:
    """Area of the spoke triangle via Heron's formula.

    The radicand is clamped at zero so that near-degenerate triangles cannot
    produce NaN through floating-point cancellation.
    """
    l_ab, l_ac, l_bc = triangle_sides(alpha, beta, gamma)
    s = (l_ab + l_bc + l_ac) / 2.0
    radicand = s * (s - l_ab) * (s - l_bc) * (s - l_ac)
    return math.sqrt(max(radicand, 0.0))


def epu_score(alpha: float, beta: float, gamma: float, tmin: float = DEFAULT_TMIN) -> float:
    """Document score from its three concept similarities.

    Each similarity is gated at ``tmin``; if any gated value is zero (or
    negative) the triangle collapses and the score is exactly 0.0. Otherwise
    the score is the triangle area, which is maximal when all three concepts
    are strongly present.
    """
    a = gate(alpha, tmin)
    b = gate(beta, tmin)
    g = gate(gamma, tmin)
    if a <= 0.0 or b <= 0.0 or g <= 0.0:
        return 0.0
    return triangle_area(a, b, g)


@dataclass
class DocumentScore:
    """Per-document scoring record: raw similarities plus the final score."""

    doc_id: str
    month: str
    alpha: float
    beta: float
    gamma: float
    score: float


class ConceptScorer:
    """Scores token lists against three concept words over a fixed embedding table.

    Cosine similarities between every vocabulary word and the three concept
    vectors are precomputed once, so scoring a document is a vocabulary lookup
    plus a per-concept maximum.
    """

    def __init__(
        self,
        table: EmbeddingTable,
        seeds: Sequence[str] = DEFAULT_SEEDS,
        tmin: float = DEFAULT_TMIN,
    ):
        if len(seeds) != 3:
            raise ValueError(f"exactly three concept words required, got {len(seeds)}")
        missing = [s for s in seeds if s not in table]
        if missing:
            raise ValueError(f"concept word(s) not in embedding vocabulary: {missing}")
        self.table = table
        self.seeds = tuple(seeds)
        self.tmin = float(tmin)
        concept_units = np.stack([table.unit_vector(s) for s in seeds])
        # (n_words, 3): cosine of every vocabulary word to each concept
        self.sims = table.unit_matrix @ concept_units.T

    def components(self, tokens: Iterable[str]) -> tuple[float, float, float]:
        """Best similarity any token reaches per concept (0.0 if none in vocabulary)."""
        index = self.table.index
        ids = [index[t] for t in tokens if t in index]
        if not ids:
            return (0.0, 0.0, 0.0)
        best = self.sims[ids].max(axis=0)
        return (float(best[0]), float(best[1]), float(best[2]))

    def score_tokens(self, tokens: Iterable[str]) -> float:
        alpha, beta, gamma = self.components(tokens)
        return epu_score(alpha, beta, gamma, self.tmin)

    def score_document(self, doc: Document) -> tuple[tuple[float, float, float], float]:
        """Gated concept triple and score for one document."""
        alpha, beta, gamma = self.components(doc.tokens)
        gated = (gate(alpha, self.tmin), gate(beta, self.tmin), gate(gamma, self.tmin))
        return gated, epu_score(alpha, beta, gamma, self.tmin)

    def components_batch(self, token_lists: Sequence[Sequence[str]]) -> np.ndarray:
        """Concept components for many documents at once.

        Token lists are flattened into one id array so the per-document maxima
        reduce in a single vectorized pass.
        """
        index = self.table.index
        flat: list[int] = []
        starts = np.empty(len(token_lists), dtype=np.intp)
        lengths = np.empty(len(token_lists), dtype=np.intp)
        for i, tokens in enumerate(token_lists):
            starts[i] = len(flat)
            flat.extend(index[t] for t in tokens if t in index)
            lengths[i] = len(flat) - starts[i]

        out = np.zeros((len(token_lists), 3))
        if not flat:
            return out
        sims = self.sims[np.asarray(flat, dtype=np.intp)]
        nonempty = lengths > 0
        # reduceat needs strictly valid segment starts: empty documents are
        # skipped here and keep their zero rows
        out[nonempty] = np.maximum.reduceat(sims, starts[nonempty], axis=0)
        return out

    def scores_from_components(self, comps: np.ndarray) -> np.ndarray:
        """Vectorized threshold gate + triangle area, matching the scalar path."""
        comps = np.asarray(comps, dtype=np.float64)
        gated = np.where(comps >= self.tmin, comps, 0.0)
        a, b, g = gated[:, 0], gated[:, 1], gated[:, 2]
        l_ab = np.sqrt(a * a + b * b + a * b)
        l_ac = np.sqrt(a * a + g * g + a * g)
        l_bc = np.sqrt(b * b + g * g + b * g)
        s = (l_ab + l_bc + l_ac) / 2.0
        radicand = s * (s - l_ab) * (s - l_bc) * (s - l_ac)
        area = np.sqrt(np.maximum(radicand, 0.0))
        area[gated.min(axis=1) <= 0.0] = 0.0
        return area

    def score_batch(self, token_lists: Sequence[Sequence[str]]) -> np.ndarray:
        return self.scores_from_components(self.components_batch(token_lists))

    def score_documents(
        self,
        documents: Sequence[Document],
        threads: int = 1,
        chunk_size: int = 4096,
    ) -> list[DocumentScore]:
        """Score a document collection, optionally across worker threads.

        Documents are split into fixed-size chunks scored independently; chunk
        results are concatenated in input order, so the output is identical
        for any thread count.
        """
        chunks = [documents[i : i + chunk_size] for i in range(0, len(documents), chunk_size)]

        def work(chunk: Sequence[Document]) -> list[DocumentScore]:
            comps = self.components_batch([doc.tokens for doc in chunk])
            scores = self.scores_from_components(comps)
            return [
                DocumentScore(
                    doc_id=doc.id,
                    month=doc.month,
                    alpha=float(comps[i, 0]),
                    beta=float(comps[i, 1]),
                    gamma=float(comps[i, 2]),
                    score=float(scores[i]),
                )
                for i, doc in enumerate(chunk)
            ]

        if threads <= 1 or len(chunks) <= 1:
            results = [work(chunk) for chunk in chunks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, chunks))
        return [row for chunk_rows in results for row in chunk_rows]


def build_index(
    scores: Iterable[DocumentScore],
    stats,
    label: str = "epu",
) -> tuple[MonthlySeries, MonthlySeries]:
    """Monthly index from document scores: (normalized, standardized) series.

    Monthly score sums are divided by that month's total article count (not
    just scored articles), then rescaled to zero mean and unit population
    standard deviation over the observed months.
    """
    normalized = aggregate_monthly(
        ((s.month, s.score) for s in scores), stats, label=label
    )
    return normalized, standardize(normalized)


def write_scores_csv(path: str | Path, scores: Iterable[DocumentScore]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "alpha", "beta", "gamma", "score"])
        for s in scores:
            writer.writerow(
                [s.doc_id, repr(s.alpha), repr(s.beta), repr(s.gamma), repr(s.score)]
            )


def read_scores_csv(path: str | Path) -> list[DocumentScore]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            DocumentScore(
                doc_id=row["doc_id"],
                month=row.get("month", ""),
                alpha=float(row["alpha"]),
                beta=float(row["beta"]),
                gamma=float(row["gamma"]),
                score=float(row["score"]),
            )
            for row in reader
        ]
