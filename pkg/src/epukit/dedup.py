"""Near-duplicate document detection with MinHash signatures and LSH banding.

Banding only proposes candidate pairs; every candidate is verified against
the exact Jaccard similarity of the shingle sets, so reported groups carry no
false positives at the configured threshold.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document
from .series import MonthlySeries, month_range

log = logging.getLogger(__name__)

# Mersenne prime 2^31 - 1: keeps a*x + b inside uint64 for the universal
# hash family while leaving p itself free as the empty-set sentinel
_PRIME = np.uint64((1 << 31) - 1)

DEFAULT_SHINGLE_K = 3
DEFAULT_NUM_HASHES = 256
DEFAULT_BANDS = 32
DEFAULT_ROWS_PER_BAND = 8
DEFAULT_THRESHOLD = 0.8


def shingles(tokens: Sequence[str], k: int = DEFAULT_SHINGLE_K) -> set[tuple[str, ...]]:
    """Set of contiguous k-token grams; shorter documents give the empty set."""
    if k < 1:
        raise ValueError(f"shingle size must be >= 1, got {k}")
    return {tuple(tokens[i : i + k]) for i in range(len(tokens) - k + 1)}


def _shingle_ids(shingle_set: Iterable[tuple[str, ...]]) -> np.ndarray:
    """Stable 31-bit integer ids for shingles (independent of process state)."""
    ids = [
        int.from_bytes(
            hashlib.blake2b("\x1f".join(s).encode("utf-8"), digest_size=8).digest(),
            "little",
        )
        % int(_PRIME)
        for s in shingle_set
    ]
    return np.asarray(ids, dtype=np.uint64)


def exact_jaccard(a: set, b: set) -> float:
    """|a ∩ b| / |a ∪ b|, with two empty sets defined as 0 (nothing shared)."""
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class MinHasher:
    """Fixed family of universal hash functions h_i(x) = (a_i x + b_i) mod p.

    The signature of a set is the per-function minimum over the shingle ids;
    the probability that two signatures agree at a position equals the sets'
    Jaccard similarity. The empty set maps to an all-``p`` sentinel, which no
    real hash value can equal, so empty documents match nothing.
    """

    def __init__(self, num_hashes: int = DEFAULT_NUM_HASHES, seed: int = 0):
        if num_hashes < 1:
            raise ValueError(f"num_hashes must be >= 1, got {num_hashes}")
        self.num_hashes = num_hashes
        rng = random.Random(seed)
        p = int(_PRIME)
        self._a = np.asarray(
            [rng.randrange(1, p) for _ in range(num_hashes)], dtype=np.uint64
        )[:, None]
        self._b = np.asarray(
            [rng.randrange(0, p) for _ in range(num_hashes)], dtype=np.uint64
        )[:, None]

    def signature(self, shingle_set: Iterable[tuple[str, ...]]) -> np.ndarray:
        return self.signature_from_ids(_shingle_ids(shingle_set))

    def signature_from_ids(self, ids: np.ndarray) -> np.ndarray:
        if ids.size == 0:
            return np.full(self.num_hashes, _PRIME, dtype=np.uint64)
        values = (self._a * ids[None, :] + self._b) % _PRIME
        return values.min(axis=1)

    def is_sentinel(self, signature: np.ndarray) -> bool:
        return bool((signature == _PRIME).all())


def estimate_jaccard(sig_a: np.ndarray, sig_b: np.ndarray) -> float:
    """Fraction of agreeing signature positions; 0 for sentinel signatures."""
    if sig_a.shape != sig_b.shape:
        raise ValueError("signature length mismatch")
    if (sig_a == _PRIME).all() or (sig_b == _PRIME).all():
        return 0.0
    return float(np.mean(sig_a == sig_b))


@dataclass
class DuplicateGroup:
    group_id: int
    representative: str
    members: list[str]  # doc ids, representative first


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def find_near_duplicates(
    documents: Sequence[Document],
    shingle_k: int = DEFAULT_SHINGLE_K,
    num_hashes: int = DEFAULT_NUM_HASHES,
    bands: int = DEFAULT_BANDS,
    rows_per_band: int = DEFAULT_ROWS_PER_BAND,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    threads: int = 1,
) -> list[DuplicateGroup]:
    """Groups of documents whose shingle sets reach the Jaccard threshold.

    Signatures are banded; documents sharing any band bucket become candidate
    pairs, which are then verified exactly. Verified pairs are merged into
    groups (union of pairs), and each group's representative is its earliest
    published document (ties broken by id). Deterministic for a fixed seed
    regardless of thread count.
    """
    if bands * rows_per_band != num_hashes:
        raise ValueError(
            f"bands x rows_per_band must equal num_hashes "
            f"({bands} x {rows_per_band} != {num_hashes})"
        )
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")

    shingle_sets = [shingles(doc.tokens, shingle_k) for doc in documents]
    hasher = MinHasher(num_hashes=num_hashes, seed=seed)

    def sign_chunk(chunk: Sequence[set]) -> list[np.ndarray]:
        return [hasher.signature_from_ids(_shingle_ids(s)) for s in chunk]

    chunk_size = 1024
    chunks = [shingle_sets[i : i + chunk_size] for i in range(0, len(shingle_sets), chunk_size)]
    if threads <= 1 or len(chunks) <= 1:
        signed = [sign_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            signed = list(pool.map(sign_chunk, chunks))
    signatures = [sig for chunk in signed for sig in chunk]

    buckets: dict[tuple[int, bytes], list[int]] = {}
    for i, sig in enumerate(signatures):
        if hasher.is_sentinel(sig):
            continue
        for band in range(bands):
            key = (band, sig[band * rows_per_band : (band + 1) * rows_per_band].tobytes())
            buckets.setdefault(key, []).append(i)

    candidates: set[tuple[int, int]] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                candidates.add((members[a], members[b]))

    uf = _UnionFind(len(documents))
    verified = 0
    for i, j in sorted(candidates):
        if exact_jaccard(shingle_sets[i], shingle_sets[j]) >= threshold:
            uf.union(i, j)
            verified += 1
    log.info(
        "%d candidate pair(s), %d verified at threshold %.2f",
        len(candidates), verified, threshold,
    )

    components: dict[int, list[int]] = {}
    for i in range(len(documents)):
        components.setdefault(uf.find(i), []).append(i)

    groups = []
    for members in components.values():
        if len(members) < 2:
            continue
        ordered = sorted(members, key=lambda i: (documents[i].published_at, documents[i].id))
        groups.append(ordered)
    groups.sort(key=lambda m: (documents[m[0]].published_at, documents[m[0]].id))
    return [
        DuplicateGroup(
            group_id=g + 1,
            representative=documents[members[0]].id,
            members=[documents[i].id for i in members],
        )
        for g, members in enumerate(groups)
    ]


def deduplicate(
    documents: Sequence[Document],
    groups: list[DuplicateGroup],
) -> list[Document]:
    """Drop every group member except its representative, order preserved."""
    drop = {
        doc_id
        for group in groups
        for doc_id in group.members
        if doc_id != group.representative
    }
    return [doc for doc in documents if doc.id not in drop]


def write_groups_csv(path: str | Path, groups: list[DuplicateGroup]) -> None:
    """CSV rows ``group_id,doc_id,representative`` (representative as 1/0)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "doc_id", "representative"])
        for group in groups:
            for doc_id in group.members:
                writer.writerow(
                    [group.group_id, doc_id, 1 if doc_id == group.representative else 0]
                )


def read_groups_csv(path: str | Path) -> list[DuplicateGroup]:
    rows: dict[int, list[tuple[str, bool]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(int(row["group_id"]), []).append(
                (row["doc_id"], row["representative"] == "1")
            )
    groups = []
    for group_id in sorted(rows):
        members = [doc_id for doc_id, _ in rows[group_id]]
        reps = [doc_id for doc_id, is_rep in rows[group_id] if is_rep]
        if len(reps) != 1:
            raise ValueError(f"group {group_id} must have exactly one representative")
        groups.append(DuplicateGroup(group_id=group_id, representative=reps[0], members=members))
    return groups


def load_filter_terms(path: str | Path) -> frozenset[str]:
    """One lowercase term per line; blanks and ``#`` comments ignored."""
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            text = line.strip()
            if text and not text.startswith("#"):
                terms.add(text.lower())
    if not terms:
        raise ValueError(f"no filter terms in {path}")
    return frozenset(terms)


def mention_series(
    documents: Sequence[Document],
    stats,
    filter_terms: Iterable[str],
    label: str = "mentions",
    **dedup_kwargs,
) -> tuple[MonthlySeries, list[DuplicateGroup]]:
    """Monthly count of deduplicated documents mentioning any filter term.

    Documents containing at least one filter term are deduplicated; the
    series counts the surviving representatives per month, with months that
    have no recorded articles left missing.
    """
    terms = frozenset(t.lower() for t in filter_terms)
    if not terms:
        raise ValueError("empty filter term set")
    matching = [doc for doc in documents if not terms.isdisjoint(doc.tokens)]
    groups = find_near_duplicates(matching, **dedup_kwargs)
    kept = deduplicate(matching, groups)

    totals = stats.docs_per_month if hasattr(stats, "docs_per_month") else dict(stats)
    if not totals:
        raise ValueError("no monthly article counts: empty corpus statistics")
    keys = sorted(totals)
    counts: dict[str, int] = {}
    for doc in kept:
        counts[doc.month] = counts.get(doc.month, 0) + 1
    values: dict[str, float | None] = {}
    for month in month_range(keys[0], keys[-1]):
        n = totals.get(month, 0)
        values[month] = float(counts.get(month, 0)) if n > 0 else None
    return MonthlySeries(label=label, stage="raw", values=values), groups
