"""End-to-end orchestration: declarative run configuration, staged execution,
artifact commits, and a run manifest for reproducibility."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .baselines import KeywordSets, bbd_index, braun_index
from .corpus import ingest_file, load_store
from .embeddings import load_embeddings
from .epu import ConceptScorer, build_index, write_scores_csv
from .plots import plot_mse_curve, plot_series
from .series import write_series_csv
from .wui import WuiConfig, estimate_monthly_wui, read_targets_csv, write_mse_curve_csv

log = logging.getLogger(__name__)

STAGES = ("epu", "bbd", "braun", "wui")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _as_bool(value, key: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"config key {key!r}: expected a boolean, got {value!r}")


@dataclass
class RunConfig:
    """Everything a pipeline run depends on, resolvable from file + flags."""

    corpus: str = ""
    embeddings: str = ""
    seeds: tuple[str, str, str] = ("economy", "policy", "uncertainty")
    tmin: float = 0.5
    keywords: str = ""
    targets: str = ""
    out: str = "out"
    date_start: str = ""
    date_end: str = ""
    max_df_ratio: float = 0.6
    min_tf: int = 1
    kmax: int = 10
    selection: str = "loo"
    scale: bool = False
    braun_mode: str = "product"
    braun_normalize: bool = False
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    dump_scores: bool = False

    @classmethod
    def from_sources(cls, file_values: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        """Build a config from file values with flag overrides winning."""
        merged: dict = {}
        for source in (file_values or {}), (overrides or {}):
            for key, value in source.items():
                if value is None:
                    continue
                merged[key.replace("-", "_")] = value
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")

        kwargs: dict = {}
        for f in dataclasses.fields(cls):
            if f.name not in merged:
                continue
            value = merged[f.name]
            if f.name == "seeds":
                if isinstance(value, str):
                    value = tuple(s.strip() for s in value.split(",") if s.strip())
                else:
                    value = tuple(value)
            elif f.name in ("tmin", "max_df_ratio"):
                value = float(value)
            elif f.name in ("min_tf", "kmax", "seed", "threads"):
                value = int(value)
            elif f.name in ("scale", "braun_normalize", "dump_scores"):
                value = _as_bool(value, f.name)
            else:
                value = str(value)
            kwargs[f.name] = value
        return cls(**kwargs)

    def validate(self, stages: tuple[str, ...] = STAGES) -> None:
        """Check invariants and that every referenced input exists, up front."""
        if not 0.0 < self.tmin <= 1.0:
            raise ValueError(f"tmin must be in (0, 1], got {self.tmin}")
        if len(self.seeds) != 3:
            raise ValueError(f"exactly three seed words required, got {len(self.seeds)}")
        if self.selection not in ("loo", "train"):
            raise ValueError(f"selection must be 'loo' or 'train', got {self.selection!r}")
        if self.braun_mode not in ("product", "joint"):
            raise ValueError(f"braun_mode must be 'product' or 'joint', got {self.braun_mode!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if bool(self.date_start) != bool(self.date_end):
            raise ValueError("date_start and date_end must be set together")
        if not self.corpus:
            raise ValueError("no corpus configured")
        if not Path(self.corpus).exists():
            raise FileNotFoundError(f"corpus not found: {self.corpus}")
        if "epu" in stages:
            if not self.embeddings:
                raise ValueError("epu stage requires an embeddings file")
            if not Path(self.embeddings).exists():
                raise FileNotFoundError(f"embeddings not found: {self.embeddings}")
        if ("bbd" in stages or "braun" in stages):
            if not self.keywords:
                raise ValueError("bbd/braun stages require a keywords file")
            if not Path(self.keywords).exists():
                raise FileNotFoundError(f"keywords not found: {self.keywords}")
        if "wui" in stages:
            if not self.targets:
                raise ValueError("wui stage requires a quarterly targets file")
            if not Path(self.targets).exists():
                raise FileNotFoundError(f"targets not found: {self.targets}")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["seeds"] = list(self.seeds)
        return data

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file (# comments, blank lines ok)."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = text.partition("=")
            values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _input_digests(config: RunConfig) -> dict[str, str]:
    digests: dict[str, str] = {}
    for name in ("corpus", "embeddings", "keywords", "targets"):
        value = getattr(config, name)
        if not value:
            continue
        path = Path(value)
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file():
                    digests[str(child)] = _sha256_file(child)
        elif path.is_file():
            digests[str(path)] = _sha256_file(path)
    return digests


class _StageOutputs:
    """Write stage artifacts as ``.partial`` files, renamed only on commit."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.pending: list[Path] = []

    def path(self, name: str) -> Path:
        partial = self.out_dir / (name + ".partial")
        self.pending.append(partial)
        return partial

    def commit(self) -> list[Path]:
        final = []
        for partial in self.pending:
            target = partial.with_name(partial.name[: -len(".partial")])
            partial.replace(target)
            final.append(target)
        self.pending.clear()
        return final


def run_pipeline(config: RunConfig, which: str = "all") -> dict:
    """Run the requested index pipelines and write artifacts plus a manifest.

    ``which`` is one stage name (``epu``, ``bbd``, ``braun``, ``wui``) or
    ``all``. The manifest is written even when a stage fails, naming the
    failing stage; that stage's outputs keep a ``.partial`` suffix.
    """
    if which == "all":
        stages = STAGES
    elif which in STAGES:
        stages = (which,)
    else:
        raise ValueError(f"unknown pipeline selection: {which!r} (use {('all',) + STAGES})")
    config.validate(stages)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "status": "ok",
        "failed_stage": None,
        "which": which,
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "inputs": _input_digests(config),
        "versions": {
            "epukit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "stages": {},
        "artifacts": [],
    }

    standardized_series = []
    current_stage = "corpus"
    try:
        started = time.perf_counter()
        corpus_path = Path(config.corpus)
        date_range = (config.date_start, config.date_end) if config.date_start else None
        if corpus_path.is_dir():
            documents, stats = load_store(corpus_path)
        else:
            result = ingest_file(corpus_path, date_range=date_range)
            documents, stats = result.documents, result.stats
        if not documents:
            raise ValueError("corpus is empty")
        manifest["stages"]["corpus"] = round(time.perf_counter() - started, 6)
        log.info("corpus loaded: %d documents over %d months",
                 len(documents), len(stats.docs_per_month))

        for stage in stages:
            current_stage = stage
            started = time.perf_counter()
            outputs = _StageOutputs(out_dir)

            if stage == "epu":
                table = load_embeddings(config.embeddings)
                scorer = ConceptScorer(table, seeds=config.seeds, tmin=config.tmin)
                scores = scorer.score_documents(documents, threads=config.threads)
                normalized, standardized = build_index(scores, stats, label="epu")
                write_series_csv(outputs.path("epu.csv"), [normalized, standardized])
                if config.dump_scores:
                    write_scores_csv(outputs.path("epu_scores.csv"), scores)
                plot_series(outputs.path("epu.png"), standardized, title="embedding index")
            elif stage == "bbd":
                sets = KeywordSets.from_file(config.keywords)
                normalized, standardized = bbd_index(documents, sets, stats, label="bbd")
                write_series_csv(outputs.path("bbd.csv"), [normalized, standardized])
                plot_series(outputs.path("bbd.png"), standardized, title="keyword-count index")
            elif stage == "braun":
                sets = KeywordSets.from_file(config.keywords)
                raw, standardized = braun_index(
                    documents, sets, stats,
                    mode=config.braun_mode, normalize=config.braun_normalize, label="braun",
                )
                write_series_csv(outputs.path("braun.csv"), [raw, standardized])
                plot_series(outputs.path("braun.png"), standardized, title="product-count index")
            elif stage == "wui":
                targets = read_targets_csv(config.targets)
                wui_config = WuiConfig(
                    kmax=config.kmax,
                    selection=config.selection,
                    scale=config.scale,
                    max_df_ratio=config.max_df_ratio,
                    min_tf=config.min_tf,
                )
                result = estimate_monthly_wui(documents, stats, targets, wui_config)
                standardized = result.standardized
                write_series_csv(outputs.path("wui.csv"), [result.raw, result.standardized])
                write_mse_curve_csv(outputs.path("wui_mse_curve.csv"), result.mse_curve)
                plot_series(outputs.path("wui.png"), result.standardized,
                            title="regression-estimated index")
                plot_mse_curve(outputs.path("wui_mse.png"), result.mse_curve,
                               best_k=result.best_k, title="component selection")

            committed = outputs.commit()
            manifest["artifacts"].extend(p.name for p in committed)
            standardized_series.append(standardized)
            manifest["stages"][stage] = round(time.perf_counter() - started, 6)
            log.info("stage %s done in %.2fs", stage, manifest["stages"][stage])

        if len(standardized_series) > 1:
            current_stage = "report"
            started = time.perf_counter()
            outputs = _StageOutputs(out_dir)
            plot_series(outputs.path("indices.png"), standardized_series,
                        title="standardized indices")
            manifest["artifacts"].extend(p.name for p in outputs.commit())
            manifest["stages"]["report"] = round(time.perf_counter() - started, 6)
    except BaseException as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = current_stage
        manifest["error"] = str(exc)
        _write_manifest(out_dir, manifest)
        raise PipelineError(current_stage, exc) from exc

    _write_manifest(out_dir, manifest)
    return manifest


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
