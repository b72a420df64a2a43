"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import math
from datetime import datetime, timezone

import numpy as np
import pytest

from epukit.corpus import Document, SynthSpec, generate_synthetic, synthetic_embedding_rows
from epukit.embeddings import EmbeddingTable


# --- independent oracles ----------------------------------------------------

def shoelace_area(vertices: np.ndarray) -> float:
    """Polygon area via the shoelace formula (cross-product oracle)."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    n = len(vertices)
    acc = 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += x[i] * y[j] - x[j] * y[i]
    return abs(acc) / 2.0


def closed_form_area(alpha: float, beta: float, gamma: float) -> float:
    """Triangle area as (sqrt(3)/4)(ab + bg + ga): three 120-degree wedges."""
    return math.sqrt(3.0) / 4.0 * (alpha * beta + beta * gamma + gamma * alpha)


def ols_fitted(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares fitted values with an intercept column."""
    design = np.column_stack([np.ones(len(y)), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return design @ coef


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def mann_whitney_permutation_p(
    group: np.ndarray, rest: np.ndarray, shuffles: int = 10_000, seed: int = 0
) -> float:
    """One-sided permutation p-value for 'group values exceed rest'.

    Uses the rank-sum statistic (equivalent to the U statistic up to a
    constant) with average ranks for ties; the add-one estimator keeps the
    p-value strictly positive.
    """
    values = np.concatenate([group, rest])
    ranks = _average_ranks(values)
    k = len(group)
    observed = float(ranks[:k].sum())
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(shuffles):
        perm = rng.permutation(len(values))[:k]
        if ranks[perm].sum() >= observed:
            hits += 1
    return (hits + 1) / (shuffles + 1)


def cophenetic_matrix(labels: list[str], merges: list[tuple[int, int, float]]) -> np.ndarray:
    """Pairwise cophenetic distances implied by a merge list."""
    n = len(labels)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    out = np.zeros((n, n))
    for step, (left, right, distance) in enumerate(merges):
        for a in members[left]:
            for b in members[right]:
                out[a, b] = out[b, a] = distance
        members[n + step] = members.pop(left) + members.pop(right)
    return out


# --- document helpers ---------------------------------------------------------

def make_doc(doc_id: str, month: str, tokens: list[str], day: int = 1, topic=None) -> Document:
    year, mon = int(month[:4]), int(month[5:7])
    return Document(
        id=doc_id,
        published_at=datetime(year, mon, day, 12, 0, 0, tzinfo=timezone.utc),
        title=" ".join(tokens[:2]),
        body=" ".join(tokens[2:]),
        tokens=list(tokens),
        topic=topic,
    )


def docs_from_records(records: list[dict]) -> tuple[list[Document], "CorpusStats"]:
    from epukit.corpus import ingest_lines
    import json

    lines = [json.dumps(r) for r in records]
    result = ingest_lines(lines)
    assert result.rejected == 0
    return result.documents, result.stats


# --- shared synthetic world ---------------------------------------------------

SHOCKS = {
    "2015-03": 0.2,
    "2015-11": 0.4,
    "2016-07": 0.6,
    "2017-02": 0.8,
    "2018-06": 1.0,
}


@pytest.fixture(scope="session")
def shock_spec() -> SynthSpec:
    from epukit.series import month_range

    return SynthSpec(
        months=month_range("2015-01", "2018-12"),
        base_docs_per_month=200,
        shock_months=dict(SHOCKS),
        seed=42,
    )


@pytest.fixture(scope="session")
def shock_world(shock_spec):
    """48-month planted-shock corpus with matched embeddings, scored once."""
    records, truth = generate_synthetic(shock_spec)
    documents, stats = docs_from_records(records)
    words, matrix = synthetic_embedding_rows(shock_spec.vocabulary, dim=16, seed=shock_spec.seed)
    table = EmbeddingTable(words, matrix)
    return {
        "spec": shock_spec,
        "documents": documents,
        "stats": stats,
        "truth": {row.month: row for row in truth},
        "table": table,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
