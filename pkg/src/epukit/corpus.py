"""News corpus handling: tokenization, ingestion, statistics, synthetic corpora."""

from __future__ import annotations

import csv
import json
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Collection, Iterable, Iterator

import numpy as np

from .series import month_range

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

Tokenizer = Callable[[str], list[str]]


def tokenize(raw_text: str, stopwords: Collection[str] | None = None) -> list[str]:
    """Lowercase and split on whitespace/punctuation, dropping stop-words.

    Order is preserved; empty input yields an empty list.
    """
    tokens = _TOKEN_RE.findall(raw_text.lower())
    if stopwords:
        stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
        tokens = [t for t in tokens if t not in stop]
    return tokens


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp to an aware UTC datetime (naive => UTC)."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass
class Document:
    """One news article: the atomic scoring unit."""

    id: str
    published_at: datetime
    title: str
    body: str
    tokens: list[str] = field(default_factory=list)
    topic: str | None = None

    @property
    def month(self) -> str:
        return f"{self.published_at.year:04d}-{self.published_at.month:02d}"


@dataclass
class CorpusStats:
    """One-pass corpus statistics with an associative, commutative merge."""

    total_docs: int = 0
    doc_freq: Counter = field(default_factory=Counter)
    term_freq: Counter = field(default_factory=Counter)
    docs_per_month: Counter = field(default_factory=Counter)

    def add_document(self, doc: Document) -> None:
        self.total_docs += 1
        self.docs_per_month[doc.month] += 1
        counts = Counter(doc.tokens)
        for word, n in counts.items():
            self.doc_freq[word] += 1
            self.term_freq[word] += n

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        merged = CorpusStats(
            total_docs=self.total_docs + other.total_docs,
            doc_freq=self.doc_freq + other.doc_freq,
            term_freq=self.term_freq + other.term_freq,
            docs_per_month=self.docs_per_month + other.docs_per_month,
        )
        return merged

    def to_dict(self) -> dict:
        return {
            "total_docs": self.total_docs,
            "doc_freq": dict(self.doc_freq),
            "term_freq": dict(self.term_freq),
            "docs_per_month": dict(self.docs_per_month),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusStats":
        return cls(
            total_docs=data["total_docs"],
            doc_freq=Counter(data["doc_freq"]),
            term_freq=Counter(data["term_freq"]),
            docs_per_month=Counter(data["docs_per_month"]),
        )


@dataclass
class IngestResult:
    documents: list[Document]
    stats: CorpusStats
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def ingest_lines(
    lines: Iterable[str],
    stopwords: Collection[str] | None = None,
    date_range: tuple[str, str] | None = None,
    tokenizer: Tokenizer | None = None,
) -> IngestResult:
    """Ingest line-delimited JSON document records.

    Each line carries ``id``, ``published_at`` (ISO-8601), ``title`` and
    ``body`` (``topic`` is optional). Malformed lines are skipped with a
    per-line warning; they never abort the run.
    """
    documents: list[Document] = []
    stats = CorpusStats()
    seen_ids: set[str] = set()
    errors: list[tuple[int, str]] = []

    allowed_months: set[str] | None = None
    if date_range is not None:
        allowed_months = set(month_range(date_range[0], date_range[1]))

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            missing = [k for k in ("id", "published_at", "title", "body") if k not in record]
            if missing:
                raise ValueError(f"missing fields: {', '.join(missing)}")
            doc_id = str(record["id"])
            if not doc_id:
                raise ValueError("empty id")
            if doc_id in seen_ids:
                raise ValueError(f"duplicate id {doc_id!r}")
            published_at = parse_timestamp(str(record["published_at"]))
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            log.warning("line %d rejected: %s", lineno, exc)
            continue

        doc = Document(
            id=doc_id,
            published_at=published_at,
            title=str(record["title"]),
            body=str(record["body"]),
            topic=record.get("topic"),
        )
        if allowed_months is not None and doc.month not in allowed_months:
            errors.append((lineno, f"published_at outside corpus date range ({doc.month})"))
            log.warning("line %d rejected: outside date range (%s)", lineno, doc.month)
            continue

        text = doc.title + " " + doc.body
        doc.tokens = tokenizer(text) if tokenizer else tokenize(text, stopwords)
        seen_ids.add(doc_id)
        documents.append(doc)
        stats.add_document(doc)

    if errors:
        log.warning("%d rejected line(s) during ingest", len(errors))
    return IngestResult(documents=documents, stats=stats, rejected=len(errors), errors=errors)


def ingest_file(
    path: str | Path,
    stopwords: Collection[str] | None = None,
    date_range: tuple[str, str] | None = None,
    tokenizer: Tokenizer | None = None,
) -> IngestResult:
    """Ingest a line-delimited record file. An unreadable source is fatal."""
    with open(path, encoding="utf-8") as fh:
        return ingest_lines(fh, stopwords=stopwords, date_range=date_range, tokenizer=tokenizer)


DOCUMENTS_FILE = "documents.jsonl"
STATS_FILE = "stats.json"


def save_store(result: IngestResult, out_dir: str | Path) -> Path:
    """Persist an ingested corpus as a write-once document store directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / DOCUMENTS_FILE, "w", encoding="utf-8") as fh:
        for doc in result.documents:
            record = {
                "id": doc.id,
                "published_at": doc.published_at.isoformat(),
                "title": doc.title,
                "body": doc.body,
                "tokens": doc.tokens,
            }
            if doc.topic is not None:
                record["topic"] = doc.topic
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    payload = {"stats": result.stats.to_dict(), "rejected": result.rejected}
    with open(out / STATS_FILE, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    return out


def load_store(store_dir: str | Path) -> tuple[list[Document], CorpusStats]:
    """Load a document store directory written by :func:`save_store`."""
    store = Path(store_dir)
    docs_path = store / DOCUMENTS_FILE
    stats_path = store / STATS_FILE
    if not docs_path.exists() or not stats_path.exists():
        raise FileNotFoundError(f"{store} is not a document store (missing {DOCUMENTS_FILE}/{STATS_FILE})")
    documents: list[Document] = []
    with open(docs_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            documents.append(
                Document(
                    id=rec["id"],
                    published_at=parse_timestamp(rec["published_at"]),
                    title=rec["title"],
                    body=rec["body"],
                    tokens=list(rec["tokens"]),
                    topic=rec.get("topic"),
                )
            )
    with open(stats_path, encoding="utf-8") as fh:
        stats = CorpusStats.from_dict(json.load(fh)["stats"])
    return documents, stats


def prune_vocabulary(stats: CorpusStats, max_df_ratio: float, min_tf: int) -> set[str]:
    """Words that are not ubiquitous and not too rare.

    Keeps words whose document frequency is at most ``max_df_ratio`` of the
    corpus and whose total term frequency is at least ``min_tf``.
    """
    if not 0 < max_df_ratio <= 1:
        raise ValueError(f"max_df_ratio must be in (0, 1], got {max_df_ratio}")
    if min_tf < 0:
        raise ValueError(f"min_tf must be >= 0, got {min_tf}")
    if stats.total_docs == 0:
        return set()
    total = stats.total_docs
    return {
        word
        for word, df in stats.doc_freq.items()
        if df / total <= max_df_ratio and stats.term_freq[word] >= min_tf
    }


# --- synthetic corpora -----------------------------------------------------

DEFAULT_POOLS = {
    "economy": [
        "economy", "economic", "financial", "market", "inflation",
        "fiscal", "gdp", "trade", "investment", "banking",
    ],
    "policy": [
        "policy", "government", "regulation", "legislation", "reform",
        "parliament", "minister", "tax", "budget", "sanction",
    ],
    "uncertainty": [
        "uncertainty", "uncertain", "unpredictable", "volatile", "instability",
        "risk", "doubt", "turmoil", "unclear", "unstable",
    ],
    "background": [
        "city", "mayor", "festival", "weather", "football", "team", "school",
        "museum", "concert", "river", "bridge", "train", "airport", "hospital",
        "doctor", "film", "actor", "novel", "garden", "forest", "mountain",
        "harvest", "recipe", "restaurant", "tourism", "island", "village",
        "marathon", "stadium", "gallery", "orchestra", "library", "campus",
        "wildlife", "storm", "coast", "ferry", "bazaar", "bakery",
        "theater", "painter", "sculpture", "chess", "cycling", "playground",
        "lighthouse", "vineyard", "brewery", "observatory", "aquarium",
    ],
}


@dataclass
class SynthVocabulary:
    economy: list[str]
    policy: list[str]
    uncertainty: list[str]
    background: list[str]

    def __post_init__(self) -> None:
        pools = [self.economy, self.policy, self.uncertainty, self.background]
        if any(not p for p in pools):
            raise ValueError("all vocabulary pools must be nonempty")
        # every pool word must survive tokenization as itself, or generated
        # documents would leak tokens across pools
        for pool in pools:
            for word in pool:
                if tokenize(word) != [word]:
                    raise ValueError(f"pool word is not a single clean token: {word!r}")
        concept = set(self.economy) | set(self.policy) | set(self.uncertainty)
        overlap = concept & set(self.background)
        if overlap:
            raise ValueError(f"background pool overlaps concept pools: {sorted(overlap)[:5]}")

    @classmethod
    def default(cls) -> "SynthVocabulary":
        return cls(
            economy=list(DEFAULT_POOLS["economy"]),
            policy=list(DEFAULT_POOLS["policy"]),
            uncertainty=list(DEFAULT_POOLS["uncertainty"]),
            background=list(DEFAULT_POOLS["background"]),
        )


@dataclass
class SynthSpec:
    """Recipe for a synthetic news corpus with planted uncertainty shocks."""

    months: list[str]
    base_docs_per_month: int = 200
    shock_months: dict[str, float] = field(default_factory=dict)
    vocabulary: SynthVocabulary = field(default_factory=SynthVocabulary.default)
    seed: int = 0
    shock_doc_fraction: float = 0.3
    background_concept_rate: float = 0.1
    tokens_per_doc: tuple[int, int] = (20, 40)

    def __post_init__(self) -> None:
        if not self.months:
            raise ValueError("months must be nonempty")
        for month, intensity in self.shock_months.items():
            if not 0.0 <= intensity <= 1.0:
                raise ValueError(f"shock intensity for {month} outside [0, 1]: {intensity}")
        if self.base_docs_per_month <= 0:
            raise ValueError("base_docs_per_month must be positive")
        if not 0.0 <= self.shock_doc_fraction <= 1.0:
            raise ValueError("shock_doc_fraction outside [0, 1]")

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        months = data.get("months")
        if isinstance(months, dict):
            months = month_range(months["start"], months["end"])
        vocab = SynthVocabulary.default()
        if "vocabulary" in data:
            v = data["vocabulary"]
            vocab = SynthVocabulary(
                economy=list(v["economy"]),
                policy=list(v["policy"]),
                uncertainty=list(v["uncertainty"]),
                background=list(v["background"]),
            )
        kwargs = {}
        for key in ("base_docs_per_month", "shock_months", "seed",
                    "shock_doc_fraction", "background_concept_rate"):
            if key in data:
                kwargs[key] = data[key]
        if "tokens_per_doc" in data:
            kwargs["tokens_per_doc"] = tuple(data["tokens_per_doc"])
        return cls(months=list(months), vocabulary=vocab, **kwargs)


@dataclass
class ShockTruth:
    month: str
    intensity: float
    planted_docs: int


def generate_synthetic(spec: SynthSpec) -> tuple[list[dict], list[ShockTruth]]:
    """Generate a deterministic synthetic corpus plus its shock schedule.

    A month with shock intensity ``s`` gets ``round(s * shock_doc_fraction *
    base_docs_per_month)`` concept-dense documents (one word from each concept
    pool). Background documents may carry words from at most two concept pools
    so that only planted documents touch all three.
    """
    rng = random.Random(spec.seed)
    vocab = spec.vocabulary
    pools = [vocab.economy, vocab.policy, vocab.uncertainty]
    records: list[dict] = []
    truth: list[ShockTruth] = []
    counter = 0

    for month in spec.months:
        intensity = spec.shock_months.get(month, 0.0)
        n = spec.base_docs_per_month
        planted = round(intensity * spec.shock_doc_fraction * n)
        kinds = [True] * planted + [False] * (n - planted)
        rng.shuffle(kinds)
        year, mon = int(month[:4]), int(month[5:7])
        days = 28  # every month has them; keeps arithmetic trivial
        for dense in kinds:
            counter += 1
            length = rng.randint(*spec.tokens_per_doc)
            tokens = [rng.choice(vocab.background) for _ in range(length)]
            if dense:
                for pool, pos in zip(pools, rng.sample(range(length), 3)):
                    tokens[pos] = rng.choice(pool)
            elif spec.background_concept_rate > 0 and rng.random() < spec.background_concept_rate:
                for pool_idx in rng.sample(range(3), rng.randint(1, 2)):
                    tokens[rng.randrange(length)] = rng.choice(pools[pool_idx])
            ts = datetime(
                year, mon,
                1 + rng.randrange(days),
                rng.randrange(24), rng.randrange(60), rng.randrange(60),
                tzinfo=timezone.utc,
            )
            records.append(
                {
                    "id": f"synth-{counter:07d}",
                    "published_at": ts.isoformat().replace("+00:00", "Z"),
                    "title": " ".join(tokens[:4]),
                    "body": " ".join(tokens[4:]),
                }
            )
        truth.append(ShockTruth(month=month, intensity=intensity, planted_docs=planted))
    return records, truth


def synthetic_embedding_rows(
    vocab: SynthVocabulary,
    dim: int = 16,
    seed: int = 0,
    concept_band: tuple[float, float] = (0.55, 0.95),
    background_max_sim: float = 0.45,
) -> tuple[list[str], np.ndarray]:
    """Build embedding vectors matched to a synthetic vocabulary.

    The three seed words sit on orthogonal axes; concept-pool words land with
    cosine to their own seed inside ``concept_band`` and below
    ``background_max_sim`` to the other seeds; background words stay below
    ``background_max_sim`` to all seeds. Deterministic for a fixed seed.
    """
    if dim < 4:
        raise ValueError("dim must be at least 4")
    rng = np.random.default_rng(seed)
    axes = np.zeros((3, dim))
    for i in range(3):
        axes[i, i] = 1.0

    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()

    def emit(word: str, vec: np.ndarray) -> None:
        words.append(word)
        rows.append(vec)
        seen.add(word)

    seed_words = ("economy", "policy", "uncertainty")
    for i, word in enumerate(seed_words):
        emit(word, axes[i].copy())

    lo, hi = concept_band
    for i, pool in enumerate([vocab.economy, vocab.policy, vocab.uncertainty]):
        for word in pool:
            if word in seen:
                continue
            for _ in range(10_000):
                vec = axes[i] + 0.35 * rng.standard_normal(dim)
                vec /= np.linalg.norm(vec)
                sims = axes @ vec
                if lo <= sims[i] <= hi and all(
                    abs(sims[j]) < background_max_sim for j in range(3) if j != i
                ):
                    break
            else:  # pragma: no cover - rejection loop converges in a few draws
                raise RuntimeError(f"could not place concept word {word!r}")
            emit(word, vec)

    for word in vocab.background:
        if word in seen:
            continue
        for _ in range(10_000):
            vec = rng.standard_normal(dim)
            vec /= np.linalg.norm(vec)
            if np.max(np.abs(axes @ vec)) < background_max_sim:
                break
        else:  # pragma: no cover
            raise RuntimeError(f"could not place background word {word!r}")
        emit(word, vec)

    return words, np.asarray(rows)


def write_embedding_file(path: str | Path, words: list[str], matrix: np.ndarray) -> None:
    """Write word vectors as text: a size header then one word per line."""
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {matrix.shape[1]}\n")
        for word, row in zip(words, matrix):
            fh.write(word + " " + " ".join(f"{x:.8f}" for x in row) + "\n")


def write_synthetic(spec: SynthSpec, out_dir: str | Path, embedding_dim: int = 16) -> Path:
    """Materialize a synthetic corpus directory.

    Emits ``docs.jsonl`` (the ingestible record stream), ``truth.csv`` (the
    planted shock schedule), ``embeddings.txt`` and ``keywords.txt`` so a full
    pipeline run needs no external inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, truth = generate_synthetic(spec)
    with open(out / "docs.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "intensity", "planted_docs"])
        for row in truth:
            writer.writerow([row.month, repr(row.intensity), row.planted_docs])
    words, matrix = synthetic_embedding_rows(spec.vocabulary, dim=embedding_dim, seed=spec.seed)
    write_embedding_file(out / "embeddings.txt", words, matrix)
    with open(out / "keywords.txt", "w", encoding="utf-8") as fh:
        for section, pool in (
            ("economy", spec.vocabulary.economy),
            ("policy", spec.vocabulary.policy),
            ("uncertainty", spec.vocabulary.uncertainty),
        ):
            fh.write(f"[{section}]\n")
            for word in pool:
                fh.write(word + "\n")
            fh.write("\n")
    return out


def read_truth_csv(path: str | Path) -> list[ShockTruth]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            ShockTruth(
                month=row["month"],
                intensity=float(row["intensity"]),
                planted_docs=int(row["planted_docs"]),
            )
            for row in reader
        ]
