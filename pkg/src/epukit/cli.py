"""Command-line interface wiring the library into runnable pipelines."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    correlation_matrix,
    hcluster,
    read_matrix_csv,
    write_dendrogram_json,
    write_matrix_csv,
)
from .baselines import KeywordSets, bbd_index, braun_index
from .corpus import (
    SynthSpec,
    ingest_file,
    load_store,
    save_store,
    write_synthetic,
)
from .dedup import (
    DEFAULT_BANDS,
    DEFAULT_NUM_HASHES,
    DEFAULT_ROWS_PER_BAND,
    DEFAULT_SHINGLE_K,
    DEFAULT_THRESHOLD,
    find_near_duplicates,
    load_filter_terms,
    mention_series,
    write_groups_csv,
)
from .embeddings import load_embeddings
from .epu import DEFAULT_SEEDS, DEFAULT_TMIN, ConceptScorer, build_index, write_scores_csv
from .pipeline import PipelineError, RunConfig, load_config_file, run_pipeline
from .series import read_series_csv, write_series_csv
from .wui import WuiConfig, estimate_monthly_wui, read_targets_csv, write_mse_curve_csv

log = logging.getLogger(__name__)


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=argparse.SUPPRESS,
                        help="flat key = value config file; flags override it")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for parallel stages")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="root random seed")
    parser.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS,
                        help="more logging (-v info, -vv debug)")


def _load_corpus(path_str: str, date_range=None):
    path = Path(path_str)
    if path.is_dir():
        return load_store(path)
    result = ingest_file(path, date_range=date_range)
    return result.documents, result.stats


def _config_values(args) -> dict:
    config_path = getattr(args, "config", None)
    return load_config_file(config_path) if config_path else {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epukit",
        description="Build and compare economic policy uncertainty indices from a news corpus.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("ingest", help="ingest line-delimited document records into a store")
    _add_global_flags(p)
    p.add_argument("--input", required=True, help="line-delimited JSON records")
    p.add_argument("--out", required=True, help="document store directory to create")
    p.add_argument("--date-start", help="first month to keep (YYYY-MM)")
    p.add_argument("--date-end", help="last month to keep (YYYY-MM)")
    p.add_argument("--stopwords", help="stop-word file, one word per line")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted shocks")
    _add_global_flags(p)
    p.add_argument("--spec", required=True, help="synthetic corpus spec (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dim", type=int, default=16, help="synthetic embedding dimension")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("index", help="compute the embedding-based index")
    _add_global_flags(p)
    p.add_argument("--corpus", required=True, help="document store directory or records file")
    p.add_argument("--embeddings", required=True, help="word vector text file")
    p.add_argument("--tmin", type=float, default=DEFAULT_TMIN,
                   help="similarity gate threshold (default 0.5)")
    p.add_argument("--seeds", default=",".join(DEFAULT_SEEDS),
                   help="three concept words, comma-separated")
    p.add_argument("--out", required=True, help="output series CSV")
    p.add_argument("--dump-scores", metavar="PATH", help="also write per-document scores CSV")
    p.add_argument("--plot", metavar="PATH", help="also render the series to an image file")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("baseline", help="keyword-count baseline indices")
    _add_global_flags(p)
    baseline_sub = p.add_subparsers(dest="baseline", required=True, metavar="bbd|braun")
    for name in ("bbd", "braun"):
        bp = baseline_sub.add_parser(name)
        _add_global_flags(bp)
        bp.add_argument("--corpus", required=True)
        bp.add_argument("--keywords", required=True,
                        help="keyword file with [economy]/[policy]/[uncertainty] sections")
        bp.add_argument("--out", required=True, help="output series CSV")
        bp.add_argument("--plot", metavar="PATH")
        if name == "braun":
            bp.add_argument("--mode", choices=("product", "joint"), default="product")
            bp.add_argument("--normalize", action="store_true",
                            help="divide by squared monthly totals before standardizing")
            bp.add_argument("--topic-labels",
                            help="comma-separated topic labels marking economic articles")
        bp.set_defaults(func=cmd_baseline, baseline=name)

    p = sub.add_parser("wui", help="estimate a monthly index from quarterly targets")
    _add_global_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--targets", required=True, help="CSV quarter,value (quarters as YYYY-Q#)")
    p.add_argument("--kmax", type=int, default=10, help="largest component count to try")
    p.add_argument("--out", required=True, help="output series CSV")
    p.add_argument("--selection", choices=("loo", "train"), default="loo",
                   help="MSE used to pick the component count")
    p.add_argument("--scale", action="store_true", help="scale predictor columns to unit variance")
    p.add_argument("--max-df-ratio", type=float, default=0.6)
    p.add_argument("--min-tf", type=int, default=1)
    p.add_argument("--mse-out", metavar="PATH", help="MSE curve CSV (default <out>_mse_curve.csv)")
    p.add_argument("--plot", metavar="PATH", help="also render the MSE curve to an image file")
    p.set_defaults(func=cmd_wui)

    # the dedup flags are optional at parse time (and re-declared on the
    # `count` submode so they may appear on either side of it); cmd_dedup
    # applies defaults and checks the required ones
    dedup_common = argparse.ArgumentParser(add_help=False)
    dedup_common.add_argument("--corpus", help="document store directory or records file")
    dedup_common.add_argument("--threshold", type=float,
                              help=f"exact-Jaccard threshold (default {DEFAULT_THRESHOLD})")
    dedup_common.add_argument("--shingle-k", type=int,
                              help=f"token shingle size (default {DEFAULT_SHINGLE_K})")
    dedup_common.add_argument("--num-hashes", type=int,
                              help=f"signature length (default {DEFAULT_NUM_HASHES})")
    dedup_common.add_argument("--bands", type=int,
                              help=f"LSH bands (default {DEFAULT_BANDS})")
    dedup_common.add_argument("--rows-per-band", type=int,
                              help=f"rows per band (default {DEFAULT_ROWS_PER_BAND})")
    dedup_common.add_argument("--out", help="output file")
    p = sub.add_parser("dedup", parents=[dedup_common],
                       help="near-duplicate detection and deduplicated counting")
    _add_global_flags(p)
    dedup_sub = p.add_subparsers(dest="dedup_mode", metavar="[count]")
    cp = dedup_sub.add_parser("count", parents=[dedup_common],
                              help="monthly deduplicated-mention series")
    _add_global_flags(cp)
    cp.add_argument("--filter-terms", required=True,
                    help="term file; documents mentioning any term are counted")
    p.set_defaults(func=cmd_dedup, dedup_mode=None)
    cp.set_defaults(func=cmd_dedup, dedup_mode="count")

    p = sub.add_parser("analyze", help="compare index series")
    _add_global_flags(p)
    analyze_sub = p.add_subparsers(dest="analyze_mode", required=True, metavar="corr|cluster")
    ap = analyze_sub.add_parser("corr", help="pairwise correlation matrix with p-values")
    _add_global_flags(ap)
    ap.add_argument("--series", nargs="+", required=True, help="series CSV files")
    ap.add_argument("--stage", default="standardized",
                    help="series stage to compare (default standardized)")
    ap.add_argument("--out", required=True, help="matrix CSV")
    ap.set_defaults(func=cmd_analyze_corr)
    ap = analyze_sub.add_parser("cluster", help="hierarchical clustering of a matrix")
    _add_global_flags(ap)
    ap.add_argument("--matrix", required=True, help="matrix CSV from 'analyze corr'")
    ap.add_argument("--linkage", choices=("average", "single", "complete"), default="average")
    ap.add_argument("--out", required=True, help="dendrogram JSON")
    ap.add_argument("--plot", metavar="PATH", help="also render the dendrogram to an image file")
    ap.set_defaults(func=cmd_analyze_cluster)

    p = sub.add_parser("run", help="run the full pipeline and write a manifest")
    _add_global_flags(p)
    p.add_argument("--which", default="all", choices=("all", "epu", "bbd", "braun", "wui"))
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--keywords")
    p.add_argument("--targets")
    p.add_argument("--out")
    p.add_argument("--seeds")
    p.add_argument("--tmin", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--selection", choices=("loo", "train"))
    p.add_argument("--max-df-ratio", type=float)
    p.add_argument("--min-tf", type=int)
    p.add_argument("--dump-scores", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_run)

    return parser


def cmd_ingest(args) -> int:
    date_range = None
    if bool(args.date_start) != bool(args.date_end):
        raise ValueError("--date-start and --date-end must be given together")
    if args.date_start:
        date_range = (args.date_start, args.date_end)
    stopwords = None
    if args.stopwords:
        with open(args.stopwords, encoding="utf-8") as fh:
            stopwords = {line.strip().lower() for line in fh if line.strip()}
    result = ingest_file(args.input, stopwords=stopwords, date_range=date_range)
    save_store(result, args.out)
    print(f"ingested {len(result.documents)} documents "
          f"({result.rejected} rejected) -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec)
    seed = getattr(args, "seed", None)
    if seed is not None:
        spec.seed = seed
    out = write_synthetic(spec, args.out, embedding_dim=args.dim)
    with open(out / "docs.jsonl", encoding="utf-8") as fh:
        n_docs = sum(1 for _ in fh)
    print(f"wrote {n_docs} documents over {len(spec.months)} months -> {out}")
    return 0


def cmd_index(args) -> int:
    seeds = tuple(s.strip() for s in args.seeds.split(",") if s.strip())
    documents, stats = _load_corpus(args.corpus)
    table = load_embeddings(args.embeddings)
    scorer = ConceptScorer(table, seeds=seeds, tmin=args.tmin)
    threads = getattr(args, "threads", None) or 1
    scores = scorer.score_documents(documents, threads=threads)
    normalized, standardized = build_index(scores, stats, label="epu")
    write_series_csv(args.out, [normalized, standardized])
    if args.dump_scores:
        write_scores_csv(args.dump_scores, scores)
    if args.plot:
        from .plots import plot_series

        plot_series(args.plot, standardized, title="embedding index")
    nonzero = sum(1 for s in scores if s.score > 0)
    print(f"scored {len(scores)} documents ({nonzero} above threshold) -> {args.out}")
    return 0


def cmd_baseline(args) -> int:
    documents, stats = _load_corpus(args.corpus)
    sets = KeywordSets.from_file(args.keywords)
    if args.baseline == "bbd":
        raw, standardized = bbd_index(documents, sets, stats, label="bbd")
    else:
        topics = None
        if getattr(args, "topic_labels", None):
            topics = [t.strip() for t in args.topic_labels.split(",") if t.strip()]
        raw, standardized = braun_index(
            documents, sets, stats,
            topic_labels=topics, mode=args.mode, normalize=args.normalize, label="braun",
        )
    write_series_csv(args.out, [raw, standardized])
    if args.plot:
        from .plots import plot_series

        plot_series(args.plot, standardized, title=f"{args.baseline} index")
    print(f"{args.baseline} index over {len(standardized.observed())} months -> {args.out}")
    return 0


def cmd_wui(args) -> int:
    documents, stats = _load_corpus(args.corpus)
    targets = read_targets_csv(args.targets)
    config = WuiConfig(
        kmax=args.kmax,
        selection=args.selection,
        scale=args.scale,
        max_df_ratio=args.max_df_ratio,
        min_tf=args.min_tf,
    )
    result = estimate_monthly_wui(documents, stats, targets, config)
    write_series_csv(args.out, [result.raw, result.standardized])
    mse_out = args.mse_out
    if not mse_out:
        out = Path(args.out)
        mse_out = out.with_name(out.stem + "_mse_curve.csv")
    write_mse_curve_csv(mse_out, result.mse_curve)
    if args.plot:
        from .plots import plot_mse_curve

        plot_mse_curve(args.plot, result.mse_curve, best_k=result.best_k,
                       title="component selection")
    print(f"selected {result.best_k} components; "
          f"monthly series over {len(result.raw)} months -> {args.out}")
    return 0


def cmd_dedup(args) -> int:
    if not args.corpus:
        raise ValueError("--corpus is required")
    if not args.out:
        raise ValueError("--out is required")
    documents, stats = _load_corpus(args.corpus)
    seed = getattr(args, "seed", None) or 0
    threads = getattr(args, "threads", None) or 1
    kwargs = dict(
        shingle_k=args.shingle_k if args.shingle_k is not None else DEFAULT_SHINGLE_K,
        num_hashes=args.num_hashes if args.num_hashes is not None else DEFAULT_NUM_HASHES,
        bands=args.bands if args.bands is not None else DEFAULT_BANDS,
        rows_per_band=(
            args.rows_per_band if args.rows_per_band is not None else DEFAULT_ROWS_PER_BAND
        ),
        threshold=args.threshold if args.threshold is not None else DEFAULT_THRESHOLD,
        seed=seed,
        threads=threads,
    )
    if args.dedup_mode == "count":
        terms = load_filter_terms(args.filter_terms)
        series, groups = mention_series(documents, stats, terms, **kwargs)
        write_series_csv(args.out, series)
        print(f"{len(groups)} duplicate group(s) removed; "
              f"mention series over {len(series)} months -> {args.out}")
    else:
        groups = find_near_duplicates(documents, **kwargs)
        write_groups_csv(args.out, groups)
        members = sum(len(g.members) for g in groups)
        print(f"{len(groups)} duplicate group(s) covering {members} documents -> {args.out}")
    return 0


def cmd_analyze_corr(args) -> int:
    series = []
    for path in args.series:
        loaded = read_series_csv(path)
        matching = [s for s in loaded if s.stage == args.stage]
        if not matching:
            stages = sorted({s.stage for s in loaded})
            raise ValueError(f"{path}: no series at stage {args.stage!r} (has {stages})")
        series.extend(matching)
    matrix = correlation_matrix(series)
    write_matrix_csv(args.out, matrix)
    print(f"{len(matrix.labels)}x{len(matrix.labels)} correlation matrix "
          f"over {matrix.n} months -> {args.out}")
    return 0


def cmd_analyze_cluster(args) -> int:
    matrix = read_matrix_csv(args.matrix)
    dendrogram = hcluster(matrix, linkage=args.linkage)
    write_dendrogram_json(args.out, dendrogram)
    if args.plot:
        from .plots import plot_dendrogram

        plot_dendrogram(args.plot, dendrogram, title=f"{args.linkage} linkage on 1 - r")
    print(f"{len(dendrogram.merges)} merge(s) -> {args.out}")
    return 0


def cmd_run(args) -> int:
    overrides = {
        key: getattr(args, key, None)
        for key in ("corpus", "embeddings", "keywords", "targets", "out", "seeds",
                    "tmin", "kmax", "selection", "max_df_ratio", "min_tf",
                    "dump_scores")
    }
    overrides["seed"] = getattr(args, "seed", None)
    overrides["threads"] = getattr(args, "threads", None)
    config = RunConfig.from_sources(_config_values(args), overrides)
    manifest = run_pipeline(config, which=args.which)
    for stage, seconds in manifest["stages"].items():
        print(f"  {stage}: {seconds:.2f}s")
    print(f"ok -> {Path(config.out) / 'manifest.json'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbosity = getattr(args, "verbose", 0)
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=level)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
