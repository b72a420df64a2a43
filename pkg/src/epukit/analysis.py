"""Series comparison: correlation matrices and hierarchical clustering."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .series import MonthlySeries

LINKAGES = ("average", "single", "complete")


def align(series_list: Sequence[MonthlySeries]) -> tuple[list[str], np.ndarray]:
    """Common observed months across all series, plus the aligned value matrix.

    Months where any series is missing are dropped, never imputed. Returns
    the sorted month list and an (n_months, n_series) matrix.
    """
    if len(series_list) < 2:
        raise ValueError("need at least 2 series to align")
    common: set[str] | None = None
    for s in series_list:
        observed = {m for m, v in s.values.items() if v is not None}
        common = observed if common is None else common & observed
    months = sorted(common or ())
    if len(months) < 3:
        raise ValueError(f"series overlap on only {len(months)} month(s); need >= 3")
    matrix = np.array([[s.values[m] for s in series_list] for m in months])
    return months, matrix


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D vectors of equal length")
    if x.shape[0] < 3:
        raise ValueError(f"need >= 3 observations, got {x.shape[0]}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt(np.dot(xc, xc)))
    sy = float(np.sqrt(np.dot(yc, yc)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance: correlation undefined")
    r = float(np.dot(xc, yc) / (sx * sy))
    return max(-1.0, min(1.0, r))


def pearson_pvalue(r: float, n: int) -> float:
    """Two-sided p-value for a correlation via the t-distribution.

    Uses t = r sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom; |r| = 1 maps
    to p = 0 by convention.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"correlation out of range: {r}")
    if abs(r) == 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def significance_level(p: float) -> str:
    if p < 0.01:
        return "<1%"
    if p < 0.05:
        return "<5%"
    return "ns"


@dataclass
class CorrelationMatrix:
    labels: list[str]
    r: np.ndarray
    p: np.ndarray
    n: int

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.r.shape != (k, k) or self.p.shape != (k, k):
            raise ValueError("matrix shape does not match label count")
        if len(set(self.labels)) != k:
            raise ValueError("duplicate series labels")

    def pair(self, a: str, b: str) -> tuple[float, float]:
        i, j = self.labels.index(a), self.labels.index(b)
        return float(self.r[i, j]), float(self.p[i, j])


def correlation_matrix(series_list: Sequence[MonthlySeries]) -> CorrelationMatrix:
    """All pairwise correlations over the common observed window."""
    labels = [s.label for s in series_list]
    if len(set(labels)) != len(labels):
        raise ValueError("series labels must be unique for a correlation matrix")
    _, matrix = align(series_list)
    n, k = matrix.shape
    r = np.eye(k)
    p = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            rij = pearson(matrix[:, i], matrix[:, j])
            pij = pearson_pvalue(rij, n)
            r[i, j] = r[j, i] = rij
            p[i, j] = p[j, i] = pij
    return CorrelationMatrix(labels=labels, r=r, p=p, n=n)


def write_matrix_csv(path: str | Path, matrix: CorrelationMatrix) -> None:
    """Long-format pairs (upper triangle incl. diagonal): label_a,label_b,r,p,n,level."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label_a", "label_b", "r", "p", "n", "level"])
        for i, a in enumerate(matrix.labels):
            for j in range(i, len(matrix.labels)):
                r = float(matrix.r[i, j])
                p = float(matrix.p[i, j])
                writer.writerow(
                    [a, matrix.labels[j], repr(r), repr(p), matrix.n, significance_level(p)]
                )


def read_matrix_csv(path: str | Path) -> CorrelationMatrix:
    labels: list[str] = []
    entries: dict[tuple[str, str], tuple[float, float]] = {}
    n: int | None = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"label_a", "label_b", "r", "p", "n"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            a, b = row["label_a"], row["label_b"]
            for label in (a, b):
                if label not in labels:
                    labels.append(label)
            entries[(a, b)] = (float(row["r"]), float(row["p"]))
            n = int(row["n"])
    if n is None:
        raise ValueError(f"{path}: no matrix rows")
    k = len(labels)
    r = np.eye(k)
    p = np.zeros((k, k))
    for (a, b), (rv, pv) in entries.items():
        i, j = labels.index(a), labels.index(b)
        r[i, j] = r[j, i] = rv
        p[i, j] = p[j, i] = pv
    return CorrelationMatrix(labels=labels, r=r, p=p, n=n)


@dataclass
class Dendrogram:
    """Agglomerative merge history.

    Leaves are numbered 0..n-1 in label order; merge step j creates node
    n + j. Exactly n - 1 merges.
    """

    labels: list[str]
    merges: list[tuple[int, int, float]]

    def __post_init__(self) -> None:
        if len(self.merges) != len(self.labels) - 1:
            raise ValueError(
                f"{len(self.labels)} leaves require {len(self.labels) - 1} merges, "
                f"got {len(self.merges)}"
            )


def hcluster(matrix: CorrelationMatrix, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering on correlation distance d = 1 - r.

    Cluster distances are taken over all leaf pairs (min, max, or mean for
    single, complete, and average linkage). Equal-distance ties are broken by
    the lexicographically smallest pair of cluster keys, a cluster's key being
    its smallest member label, so the merge order is deterministic.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    labels = matrix.labels
    n = len(labels)
    if n < 2:
        raise ValueError("need at least 2 series to cluster")
    dist = 1.0 - matrix.r

    # members: leaf index sets; key: smallest member label (total order on
    # disjoint clusters)
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    keys: dict[int, str] = {i: labels[i] for i in range(n)}
    merges: list[tuple[int, int, float]] = []
    next_id = n

    def cluster_distance(a: int, b: int) -> float:
        pairs = dist[np.ix_(clusters[a], clusters[b])]
        if linkage == "single":
            return float(pairs.min())
        if linkage == "complete":
            return float(pairs.max())
        return float(pairs.mean())

    while len(clusters) > 1:
        best: tuple[float, str, str, int, int] | None = None
        ids = sorted(clusters)
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                a, b = ids[ai], ids[bi]
                d = cluster_distance(a, b)
                ka, kb = sorted((keys[a], keys[b]))
                cand = (d, ka, kb, a, b)
                if best is None or cand[:3] < best[:3]:
                    best = cand
        assert best is not None
        d, _, _, a, b = best
        left, right = (a, b) if keys[a] <= keys[b] else (b, a)
        merges.append((left, right, d))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        keys[next_id] = min(keys.pop(a), keys.pop(b))
        next_id += 1
    return Dendrogram(labels=list(labels), merges=merges)


def write_dendrogram_json(path: str | Path, dendrogram: Dendrogram) -> None:
    payload = {
        "labels": dendrogram.labels,
        "merges": [
            {"left": left, "right": right, "distance": distance}
            for left, right, distance in dendrogram.merges
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_dendrogram_json(path: str | Path) -> Dendrogram:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return Dendrogram(
        labels=list(payload["labels"]),
        merges=[(m["left"], m["right"], float(m["distance"])) for m in payload["merges"]],
    )
