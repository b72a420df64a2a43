"""Keyword-count uncertainty indices used as comparison baselines."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Document
from .series import MonthlySeries, month_range, standardize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KeywordSets:
    """Three keyword groups: a document must touch all of them to count."""

    economy_terms: frozenset[str]
    policy_terms: frozenset[str]
    uncertainty_terms: frozenset[str]

    def __post_init__(self) -> None:
        for name in ("economy_terms", "policy_terms", "uncertainty_terms"):
            terms = getattr(self, name)
            if not terms:
                raise ValueError(f"{name} must be nonempty")
            bad = [t for t in terms if t != t.lower() or " " in t]
            if bad:
                raise ValueError(f"{name} has non-normalized terms: {sorted(bad)[:5]}")

    @classmethod
    def from_lists(
        cls,
        economy: Iterable[str],
        policy: Iterable[str],
        uncertainty: Iterable[str],
    ) -> "KeywordSets":
        return cls(
            economy_terms=frozenset(economy),
            policy_terms=frozenset(policy),
            uncertainty_terms=frozenset(uncertainty),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "KeywordSets":
        """Parse a sectioned keyword file.

        Format: ``[economy]`` / ``[policy]`` / ``[uncertainty]`` headers, one
        term per line; blank lines and ``#`` comments ignored.
        """
        sections: dict[str, set[str]] = {"economy": set(), "policy": set(), "uncertainty": set()}
        current: str | None = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                if text.startswith("[") and text.endswith("]"):
                    name = text[1:-1].strip().lower()
                    if name not in sections:
                        raise ValueError(f"{path}:{lineno}: unknown section [{name}]")
                    current = name
                    continue
                if current is None:
                    raise ValueError(f"{path}:{lineno}: term before any [section] header")
                sections[current].add(text.lower())
        return cls.from_lists(sections["economy"], sections["policy"], sections["uncertainty"])


def bbd_match(doc: Document, sets: KeywordSets) -> bool:
    """True iff the document's tokens intersect all three keyword groups."""
    tokens = set(doc.tokens)
    return (
        not tokens.isdisjoint(sets.economy_terms)
        and not tokens.isdisjoint(sets.policy_terms)
        and not tokens.isdisjoint(sets.uncertainty_terms)
    )


def _monthly_counts(flags: Iterable[tuple[str, bool]]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for month, hit in flags:
        if hit:
            counts[month] = counts.get(month, 0) + 1
    return counts


def _series_months(stats) -> tuple[dict, list[str]]:
    totals = stats.docs_per_month if hasattr(stats, "docs_per_month") else dict(stats)
    if not totals:
        raise ValueError("no monthly article counts: empty corpus statistics")
    keys = sorted(totals)
    return totals, month_range(keys[0], keys[-1])


def bbd_raw(
    documents: Sequence[Document],
    sets: KeywordSets,
    stats,
    label: str = "bbd",
) -> MonthlySeries:
    """Monthly fraction of articles matching all three keyword groups."""
    totals, months = _series_months(stats)
    counts = _monthly_counts((doc.month, bbd_match(doc, sets)) for doc in documents)
    values: dict[str, float | None] = {}
    for month in months:
        n = totals.get(month, 0)
        values[month] = counts.get(month, 0) / n if n > 0 else None
    return MonthlySeries(label=label, stage="normalized", values=values)


def bbd_index(
    documents: Sequence[Document],
    sets: KeywordSets,
    stats,
    label: str = "bbd",
) -> tuple[MonthlySeries, MonthlySeries]:
    """(normalized, standardized) keyword-count index series."""
    raw = bbd_raw(documents, sets, stats, label=label)
    return raw, standardize(raw)


def is_economic(doc: Document, sets: KeywordSets, topic_labels: frozenset[str] | None = None) -> bool:
    """Economic-article predicate: topic label when available, else keywords.

    With ``topic_labels`` set, a document with a topic counts as economic iff
    its topic is in the set; untagged documents fall back to the keyword test.
    """
    if topic_labels is not None and doc.topic is not None:
        return doc.topic.lower() in topic_labels
    return not set(doc.tokens).isdisjoint(sets.economy_terms)


def braun_raw(
    documents: Sequence[Document],
    sets: KeywordSets,
    stats,
    topic_labels: Iterable[str] | None = None,
    mode: str = "product",
    normalize: bool = False,
    label: str = "braun",
) -> MonthlySeries:
    """Monthly uncertainty-count times economic-policy-count.

    ``mode="product"`` multiplies the month's count of uncertainty documents
    by its count of economic documents containing policy terms. The
    alternative reading, ``mode="joint"``, counts documents satisfying both
    predicates at once. ``normalize`` divides the product by the squared
    monthly article total (squared because the raw value is a product of two
    counts); the joint count is divided by the plain total.
    """
    if mode not in ("product", "joint"):
        raise ValueError(f"unknown braun mode: {mode!r}")
    labels = frozenset(t.lower() for t in topic_labels) if topic_labels is not None else None
    totals, months = _series_months(stats)

    uncertainty: dict[str, int] = {}
    econ_policy: dict[str, int] = {}
    joint: dict[str, int] = {}
    for doc in documents:
        tokens = set(doc.tokens)
        has_uncertainty = not tokens.isdisjoint(sets.uncertainty_terms)
        economic_policy = (
            is_economic(doc, sets, labels) and not tokens.isdisjoint(sets.policy_terms)
        )
        if has_uncertainty:
            uncertainty[doc.month] = uncertainty.get(doc.month, 0) + 1
        if economic_policy:
            econ_policy[doc.month] = econ_policy.get(doc.month, 0) + 1
        if has_uncertainty and economic_policy:
            joint[doc.month] = joint.get(doc.month, 0) + 1

    values: dict[str, float | None] = {}
    for month in months:
        n = totals.get(month, 0)
        if n <= 0:
            values[month] = None
            continue
        if mode == "product":
            value = float(uncertainty.get(month, 0) * econ_policy.get(month, 0))
            if normalize:
                value /= n * n
        else:
            value = float(joint.get(month, 0))
            if normalize:
                value /= n
        values[month] = value
    stage = "normalized" if normalize else "raw"
    return MonthlySeries(label=label, stage=stage, values=values)


def braun_index(
    documents: Sequence[Document],
    sets: KeywordSets,
    stats,
    topic_labels: Iterable[str] | None = None,
    mode: str = "product",
    normalize: bool = False,
    label: str = "braun",
) -> tuple[MonthlySeries, MonthlySeries]:
    """(raw-or-normalized, standardized) product-count index series."""
    raw = braun_raw(
        documents, sets, stats,
        topic_labels=topic_labels, mode=mode, normalize=normalize, label=label,
    )
    return raw, standardize(raw)
