"""Command-line interface.

Subcommands: ``build`` (persist per-dataset indexes), ``annotate``
(rank candidate concepts for query images), ``evaluate`` (score an
annotation file against ground truth, optionally as a relation-ablation
sweep), ``generate`` (seeded synthetic corpus), and ``bench``
(per-phase throughput measurements).

Every command exits nonzero on bad input, without leaving partial
output files behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import fvec
from .annotator import (
    Annotation,
    Dataset,
    EngineParams,
    Query,
    annotate_from_words,
    gather_neighbor_words,
    load_candidate_lists,
    load_concepts,
    merge_neighbor_lists,
    read_annotations,
    write_annotations,
)
from .config import (
    PRESETS,
    EngineConfig,
    apply_config_values,
    apply_preset,
    load_engine_config,
)
from .errors import EngineError, FormatError
from .evaluation import evaluate, format_report, load_ground_truth
from .index import (
    MODE_EXACT,
    MODE_PERM_PREFIX,
    build_index_from_arrays,
    load_index,
    save_index,
)
from .keywords import load_keywords
from .lexicon import RelationType, load_lexicon
from .synth import SynthConfig, generate_corpus


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    p.add_argument("--features", action="append", help="reference feature file (repeatable)")
    p.add_argument("--keywords", action="append", help="reference keyword file (repeatable)")
    p.add_argument("--index", action="append", help="index file per dataset (repeatable)")
    p.add_argument("--lexicon", help="lexicon file")
    p.add_argument("--concepts", help="concept definition file")
    p.add_argument("--output", help="annotation output file")
    p.add_argument("--dim", type=int, help="feature dimensionality")
    p.add_argument("--k", type=int, help="neighbors per query")
    p.add_argument("--m", type=int, help="concepts per annotation")
    p.add_argument("--s", type=int, help="senses per word")
    p.add_argument("--n", type=int, help="candidate synsets kept")
    p.add_argument("--weighting", choices=["uniform", "reciprocal-rank"], help="neighbor weighting")
    p.add_argument("--relations", help="comma list of relation types, or 'none'")
    p.add_argument("--lam", action="append", metavar="REL=W",
                   help="relation weight, e.g. hypernym=2.0 (repeatable)")
    p.add_argument("--alpha", type=float, help="restart probability")
    p.add_argument("--expansion-depth", type=int, choices=[0, 1], help="graph expansion depth")
    p.add_argument("--max-iters", type=int, help="propagation iteration cap")
    p.add_argument("--tol", type=float, help="propagation L1 stop tolerance")
    p.add_argument("--index-mode", choices=[MODE_EXACT, MODE_PERM_PREFIX], help="search mode")
    p.add_argument("--pivots", type=int, help="pivot count (perm-prefix)")
    p.add_argument("--prefix-len", type=int, help="permutation prefix length (perm-prefix)")
    p.add_argument("--budget", type=int, help="candidate budget (perm-prefix)")
    p.add_argument("--seed", type=int, help="rng seed for index builds")


def _resolve_config(args: argparse.Namespace) -> EngineConfig:
    cfg = EngineConfig()
    if args.config:
        cfg = load_engine_config(args.config)
    if args.preset:
        cfg = apply_preset(cfg, args.preset)
    overrides: dict[str, str] = {}
    flag_map = {
        "dim": "dim", "k": "k", "m": "m", "s": "s", "n": "n",
        "weighting": "weighting", "relations": "relations", "alpha": "alpha",
        "expansion_depth": "expansion_depth", "max_iters": "max_iters", "tol": "tol",
        "index_mode": "index.mode", "pivots": "index.pivots",
        "prefix_len": "index.prefix_len", "budget": "index.budget", "seed": "seed",
        "lexicon": "lexicon", "concepts": "concepts", "output": "output",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "features", None):
        overrides["dataset.features"] = ",".join(args.features)
    if getattr(args, "keywords", None):
        overrides["dataset.keywords"] = ",".join(args.keywords)
    if getattr(args, "index", None):
        overrides["dataset.index"] = ",".join(args.index)
    for item in getattr(args, "lam", None) or []:
        if "=" not in item:
            raise EngineError(f"--lam expects REL=WEIGHT, got {item!r}")
        rel, weight = item.split("=", 1)
        overrides[f"lambda.{rel.strip()}"] = weight.strip()
    return apply_config_values(cfg, overrides, base_dir=os.getcwd(), source="flag")


def _check_exists(path: str, what: str) -> None:
    if not os.path.exists(path):
        raise EngineError(f"missing {what}: {path}")


def _require_datasets(cfg: EngineConfig) -> None:
    if not cfg.feature_paths:
        raise EngineError("no dataset feature files configured (dataset.features / --features)")
    if len(cfg.keyword_paths) != len(cfg.feature_paths):
        raise EngineError(
            f"{len(cfg.feature_paths)} feature file(s) but {len(cfg.keyword_paths)} keyword file(s)"
        )
    if cfg.index_paths and len(cfg.index_paths) != len(cfg.feature_paths):
        raise EngineError(
            f"{len(cfg.feature_paths)} feature file(s) but {len(cfg.index_paths)} index path(s)"
        )
    if cfg.dim < 1:
        raise EngineError("feature dimensionality not set (dim / --dim)")


def _load_datasets(cfg: EngineConfig) -> list[Dataset]:
    """Load (or build) each dataset's index and keyword store."""
    datasets = []
    for pos, feat_path in enumerate(cfg.feature_paths):
        kw_path = cfg.keyword_paths[pos]
        _check_exists(kw_path, "keyword file")
        index_path = cfg.index_paths[pos] if cfg.index_paths else None
        if index_path and os.path.exists(index_path):
            index = load_index(index_path, cfg.index_config())
        else:
            _check_exists(feat_path, "feature file")
            ids, matrix = fvec.read_vectors(feat_path)
            index = build_index_from_arrays(ids, matrix, cfg.index_config())
        datasets.append(Dataset(index=index, keywords=load_keywords(kw_path)))
    return datasets


def _load_semantics(cfg: EngineConfig):
    if not cfg.lexicon_path:
        raise EngineError("no lexicon configured (lexicon / --lexicon)")
    if not cfg.concepts_path:
        raise EngineError("no concept file configured (concepts / --concepts)")
    _check_exists(cfg.lexicon_path, "lexicon file")
    _check_exists(cfg.concepts_path, "concept file")
    lexicon = load_lexicon(cfg.lexicon_path)
    concepts = load_concepts(cfg.concepts_path, lexicon)
    return lexicon, concepts


def _load_queries(cfg: EngineConfig, queries_path: str, candidates_path: str | None,
                  all_concept_names: list[str] | None = None) -> list[Query]:
    _check_exists(queries_path, "query feature file")
    ids, matrix = fvec.read_vectors(queries_path)
    if matrix.shape[1] != cfg.dim:
        raise EngineError(f"query dimensionality {matrix.shape[1]} does not match configured {cfg.dim}")
    if candidates_path is not None:
        _check_exists(candidates_path, "candidate list file")
        lists = load_candidate_lists(candidates_path)
        queries = []
        for i, qid in enumerate(ids):
            if qid not in lists:
                raise EngineError(f"query {qid!r} has no candidate list in {candidates_path}")
            queries.append(Query(qid, matrix[i], lists[qid]))
        return queries
    if not all_concept_names:
        raise EngineError("no candidate lists given and no concepts to fall back on")
    fallback = tuple(sorted(all_concept_names))
    return [Query(qid, matrix[i], fallback) for i, qid in enumerate(ids)]


def _phase_table(rows: list[tuple[str, float, int]], percentiles: dict[str, tuple[float, float, float]] | None = None) -> str:
    lines = []
    if percentiles is None:
        lines.append(f"{'phase':<20} {'total_s':>9} {'ms/query':>10}")
        for name, total, count in rows:
            per = 1000.0 * total / count if count else 0.0
            lines.append(f"{name:<20} {total:>9.3f} {per:>10.3f}")
    else:
        lines.append(f"{'phase':<20} {'total_s':>9} {'ms/query':>10} {'p50_ms':>8} {'p90_ms':>8} {'p99_ms':>8}")
        for name, total, count in rows:
            per = 1000.0 * total / count if count else 0.0
            p50, p90, p99 = percentiles.get(name, (per, per, per))
            lines.append(f"{name:<20} {total:>9.3f} {per:>10.3f} {p50:>8.3f} {p90:>8.3f} {p99:>8.3f}")
    return "\n".join(lines)


def _run_pipeline(cfg: EngineConfig, datasets: list[Dataset], lexicon, concepts,
                  queries: list[Query], search_chunk: int = 64):
    """Annotate queries, timing each phase. Returns (annotations, rows, samples)."""
    params = EngineParams(k=cfg.k, m=cfg.m, analysis=cfg.analysis_config())
    ordered = sorted(queries, key=lambda q: q.id)
    features = np.stack([np.asarray(q.feature, dtype=np.float64) for q in ordered])

    search_samples: list[float] = []
    t0 = time.perf_counter()
    neighbor_lists: list[list] = [[] for _ in datasets]
    for start in range(0, len(ordered), search_chunk):
        block = features[start : start + search_chunk]
        tb = time.perf_counter()
        for d, ds in enumerate(datasets):
            neighbor_lists[d].extend(ds.index.knn_batch(block, params.k, chunk=search_chunk))
        per = (time.perf_counter() - tb) * 1000.0 / len(block)
        search_samples.extend([per] * len(block))
    search_total = time.perf_counter() - t0

    t0 = time.perf_counter()
    word_samples: list[float] = []
    all_words = []
    stores = [ds.keywords for ds in datasets]
    for qi in range(len(ordered)):
        tq = time.perf_counter()
        merged = merge_neighbor_lists([neighbor_lists[d][qi] for d in range(len(datasets))], params.k)
        words, _missing = gather_neighbor_words(merged, stores)
        all_words.append(words)
        word_samples.append((time.perf_counter() - tq) * 1000.0)
    words_total = time.perf_counter() - t0

    t0 = time.perf_counter()
    analysis_samples: list[float] = []
    annotations: list[Annotation] = []
    for qi, query in enumerate(ordered):
        tq = time.perf_counter()
        annotations.append(annotate_from_words(query, all_words[qi], lexicon, concepts, params))
        analysis_samples.append((time.perf_counter() - tq) * 1000.0)
    analysis_total = time.perf_counter() - t0

    rows = [
        ("similarity search", search_total, len(ordered)),
        ("keyword fetch", words_total, len(ordered)),
        ("semantic analysis", analysis_total, len(ordered)),
    ]
    samples = {
        "similarity search": search_samples,
        "keyword fetch": word_samples,
        "semantic analysis": analysis_samples,
    }
    return annotations, rows, samples


def cmd_build(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    _require_datasets(cfg)
    if not cfg.index_paths:
        raise EngineError("no index output paths configured (dataset.index / --index)")
    for pos, feat_path in enumerate(cfg.feature_paths):
        _check_exists(feat_path, "feature file")
        t0 = time.perf_counter()
        ids, matrix = fvec.read_vectors(feat_path)
        index = build_index_from_arrays(ids, matrix, cfg.index_config())
        tmp = cfg.index_paths[pos] + ".tmp"
        try:
            save_index(index, tmp)
            os.replace(tmp, cfg.index_paths[pos])
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        elapsed = time.perf_counter() - t0
        print(f"dataset {pos + 1}: {len(ids)} vectors, dim {matrix.shape[1]}, "
              f"built in {elapsed:.2f}s -> {cfg.index_paths[pos]}")
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    _require_datasets(cfg)
    if not cfg.output_path:
        raise EngineError("no output path configured (output / --output)")
    datasets = _load_datasets(cfg)
    lexicon, concepts = _load_semantics(cfg)

    t0 = time.perf_counter()
    queries = _load_queries(cfg, args.queries, args.candidates, sorted(concepts))
    load_total = time.perf_counter() - t0

    annotations, rows, _samples = _run_pipeline(cfg, datasets, lexicon, concepts, queries,
                                                search_chunk=args.search_chunk)
    write_annotations(cfg.output_path, annotations)

    rows = [("feature load", load_total, len(queries))] + rows
    print(_phase_table(rows))
    total = sum(r[1] for r in rows)
    qps = len(queries) / total if total > 0 else float("inf")
    print(f"annotated {len(queries)} queries -> {cfg.output_path} ({total:.2f}s, {qps:.1f} q/s)")
    silent = sum(1 for a in annotations if a.no_keyword_signal)
    if silent:
        print(f"warning: {silent} query/queries produced no lexicon-matching keywords")
    return 0


_ABLATION_LEVELS = [
    ("frequency only (s=1, relations off)",
     lambda cfg: {"s": 1, "relations": frozenset()}),
    ("multi-sense (relations off)",
     lambda cfg: {"relations": frozenset()}),
    ("+ hierarchy (hypernym, hyponym)",
     lambda cfg: {"relations": frozenset({RelationType.HYPERNYM, RelationType.HYPONYM})}),
    ("+ parts (meronym, holonym)",
     lambda cfg: {"relations": frozenset({RelationType.HYPERNYM, RelationType.HYPONYM,
                                          RelationType.MERONYM, RelationType.HOLONYM})}),
]


def run_ablation(cfg: EngineConfig, datasets: list[Dataset], lexicon, concepts,
                 queries: list[Query], truth: dict[str, set[str]]):
    """The four analysis levels, weakest first. Returns (label, report) pairs."""
    from dataclasses import replace

    results = []
    for label, make in _ABLATION_LEVELS:
        level_cfg = replace(cfg, **make(cfg))
        annotations, _rows, _samples = _run_pipeline(level_cfg, datasets, lexicon, concepts, queries)
        results.append((label, evaluate(annotations, truth, concepts)))
    return results


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    lexicon, concepts = _load_semantics(cfg)
    _check_exists(args.truth, "ground truth file")
    truth = load_ground_truth(args.truth, concepts)

    if args.ablation:
        if not args.queries:
            raise EngineError("--ablation needs --queries (and usually --candidates)")
        _require_datasets(cfg)
        datasets = _load_datasets(cfg)
        queries = _load_queries(cfg, args.queries, args.candidates, sorted(concepts))
        results = run_ablation(cfg, datasets, lexicon, concepts, queries, truth)
        print(f"{'level':<40} {'MP-s%':>7} {'MR-s%':>7} {'MF-s%':>7} {'MAP-s%':>7}")
        for label, report in results:
            print(f"{label:<40} {100 * report.mp_s:>7.1f} {100 * report.mr_s:>7.1f} "
                  f"{100 * report.mf_s:>7.1f} {100 * report.map_s:>7.1f}")
        return 0

    output_path = args.annotations or cfg.output_path
    if not output_path:
        raise EngineError("no annotation file to evaluate (--annotations or config output)")
    _check_exists(output_path, "annotation file")
    annotations = read_annotations(output_path)
    report = evaluate(annotations, truth, concepts)
    print(format_report(report, per_concept=not args.no_per_concept))
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    synth_cfg = SynthConfig(
        rng_seed=args.seed, dim=args.dim, num_concepts=args.concepts,
        refs_per_concept=args.refs, num_queries=args.queries,
        cluster_noise_sigma=args.sigma, label_noise=args.label_noise,
        lexicon_depth=args.depth, group_size=args.group_size,
        variants_per_concept=args.variants, synonym_rate=args.synonym_rate,
        part_rate=args.part_rate, category_rate=args.category_rate,
        ambiguous_fraction=args.ambiguous_fraction,
        candidates_per_query=args.candidates_per_query,
    )
    paths = generate_corpus(synth_cfg, args.out)
    total_refs = synth_cfg.num_concepts * synth_cfg.refs_per_concept
    print(f"corpus written to {paths.root}")
    print(f"  {total_refs} reference vectors (dim {synth_cfg.dim}), "
          f"{synth_cfg.num_queries} queries, {synth_cfg.num_concepts} leaf concepts")
    print(f"  engine config: {paths.engine_config}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    _require_datasets(cfg)
    datasets = _load_datasets(cfg)
    lexicon, concepts = _load_semantics(cfg)

    t0 = time.perf_counter()
    queries = _load_queries(cfg, args.queries, args.candidates, sorted(concepts))
    load_total = time.perf_counter() - t0

    annotations, rows, samples = _run_pipeline(cfg, datasets, lexicon, concepts, queries,
                                               search_chunk=args.batch)
    rows = [("feature load", load_total, len(queries))] + rows
    percentiles = {}
    for name, values in samples.items():
        arr = np.array(values)
        percentiles[name] = tuple(float(np.percentile(arr, p)) for p in (50, 90, 99))
    print(_phase_table(rows, percentiles))
    search_total = next(r[1] for r in rows if r[0] == "similarity search")
    total = sum(r[1] for r in rows)
    print(f"search throughput: {len(queries) / search_total:.1f} q/s"
          f" (batch {args.batch}, {len(queries)} queries)")
    print(f"end-to-end throughput: {len(queries) / total:.1f} q/s")
    silent = sum(1 for a in annotations if a.no_keyword_signal)
    if silent:
        print(f"warning: {silent} query/queries produced no lexicon-matching keywords")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neartag",
                                     description="Search-based image annotation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and persist per-dataset indexes")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("annotate", help="annotate query images")
    _add_engine_flags(p)
    p.add_argument("--queries", required=True, help="query feature file")
    p.add_argument("--candidates", help="per-query candidate concept lists")
    p.add_argument("--search-chunk", type=int, default=64, help="queries per search batch")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("evaluate", help="score annotations against ground truth")
    _add_engine_flags(p)
    p.add_argument("--annotations", help="annotation file (default: configured output)")
    p.add_argument("--truth", required=True, help="ground truth file")
    p.add_argument("--no-per-concept", action="store_true", help="omit the per-concept table")
    p.add_argument("--ablation", action="store_true",
                   help="re-annotate at four analysis levels and print one row each")
    p.add_argument("--queries", help="query feature file (ablation mode)")
    p.add_argument("--candidates", help="candidate lists (ablation mode)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--concepts", type=int, default=20, help="number of leaf concepts")
    p.add_argument("--refs", type=int, default=100, help="reference images per concept")
    p.add_argument("--queries", type=int, default=200)
    p.add_argument("--sigma", type=float, default=0.25, help="cluster noise sigma")
    p.add_argument("--label-noise", type=float, default=0.1)
    p.add_argument("--depth", type=int, default=2, help="hypernym chain depth")
    p.add_argument("--group-size", type=int, default=4, help="leaf concepts per category")
    p.add_argument("--variants", type=int, default=2, help="variant synsets per leaf")
    p.add_argument("--synonym-rate", type=float, default=0.25)
    p.add_argument("--part-rate", type=float, default=0.10)
    p.add_argument("--category-rate", type=float, default=0.0)
    p.add_argument("--ambiguous-fraction", type=float, default=0.5)
    p.add_argument("--candidates-per-query", type=int, default=8)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="measure per-phase throughput")
    _add_engine_flags(p)
    p.add_argument("--queries", required=True, help="query feature file")
    p.add_argument("--candidates", help="per-query candidate lists (default: all concepts)")
    p.add_argument("--batch", type=int, default=64, help="queries per search batch")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EngineError, FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
