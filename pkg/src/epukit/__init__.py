"""Economic policy uncertainty indices from news corpora and word embeddings."""

__version__ = "0.1.0"

from .embeddings import EmbeddingTable, cosine, gate, load_embeddings, nearest_concept_word
from .epu import (
    ConceptScorer,
    epu_score,
    triangle_area,
    triangle_sides,
    triangle_vertices,
)
from .series import MonthlySeries, aggregate_monthly, standardize

__all__ = [
    "__version__",
    "EmbeddingTable",
    "cosine",
    "gate",
    "load_embeddings",
    "nearest_concept_word",
    "ConceptScorer",
    "epu_score",
    "triangle_area",
    "triangle_sides",
    "triangle_vertices",
    "MonthlySeries",
    "aggregate_monthly",
    "standardize",
]
