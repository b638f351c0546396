"""Command-line interface.

Subcommands: ``validate``, ``train``, ``rank``, ``evaluate``, ``ablate``,
``augment``, ``topics show``, and ``embed cache``. Exit codes: 0 success,
2 usage/config error, 3 data/contract error, 4 embedding-service error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import augment as augment_mod
from . import bundle as bundle_mod
from . import config as config_mod
from . import corpus as corpus_mod
from . import embeddings as embeddings_mod
from . import metrics as metrics_mod
from .errors import (CheckrankError, ConfigError, CoverageError,
                     TransportError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SERVICE = 4


def _config_overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "features": getattr(args, "features", None),
        "seed": getattr(args, "seed", None),
        "train_dir": getattr(args, "train_dir", None),
        "test_dir": getattr(args, "test_dir", None),
        "lexicon_path": getattr(args, "lexicon", None),
        "stoplist_path": getattr(args, "stoplist", None),
        "embedding_backend": getattr(args, "embedding_backend", None),
        "embedding_dim": getattr(args, "embedding_dim", None),
        "vector_store_path": getattr(args, "vector_store", None),
        "service_url": getattr(args, "service_url", None),
        "n_trees": getattr(args, "trees", None),
        "n_leaves": getattr(args, "leaves", None),
        "learning_rate": getattr(args, "learning_rate", None),
        "min_leaf": getattr(args, "min_leaf", None),
        "topics_k": getattr(args, "topics_k", None),
        "topics_top_n": getattr(args, "topics_top_n", None),
        "topics_iterations": getattr(args, "topics_iterations", None),
        "bigram_threshold": getattr(args, "bigram_threshold", None),
        "rules_enabled": True if getattr(args, "rules", False) else None,
        "augment_min_sim": getattr(args, "min_sim", None),
        "augment_max_copies": getattr(args, "max_copies", None),
        "pos_sidecar_path": getattr(args, "pos_sidecar", None),
    }
    return {k: v for k, v in mapping.items() if v is not None}


def _load_config(args: argparse.Namespace) -> config_mod.PipelineConfig:
    return config_mod.load_config(getattr(args, "config", None),
                                  overrides=_config_overrides(args))


def _gold_judgments(directory: Path) -> dict[str, metrics_mod.QueryJudgments]:
    judgments = {}
    for debate in corpus_mod.load_debates_dir(directory, labeled=True):
        relevant = frozenset(r.line_number for r in debate.records
                             if r.label == 1)
        judgments[debate.debate_id] = metrics_mod.QueryJudgments(
            query_id=debate.debate_id, relevant=relevant)
    return judgments


def _train_ranker(config: config_mod.PipelineConfig):
    if not config.train_dir:
        raise ConfigError("no training directory configured")
    debates = corpus_mod.load_debates_dir(config.train_dir, labeled=True)
    if not debates:
        raise ConfigError(f"no *.tsv files in {config.train_dir}")
    ranker = config_mod.build_ranker(config)
    ranker.fit(debates)
    return ranker


def cmd_validate(args: argparse.Namespace) -> int:
    debates = corpus_mod.load_debates_dir(args.corpus_dir,
                                          labeled=not args.unlabeled)
    report = corpus_mod.validate_corpus(debates)
    print(report.format())
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    ranker = _train_ranker(config)
    dims = ranker.block_dims()
    total = sum(dims.values())
    print("feature blocks: "
          + " ".join(f"{name}={dim}" for name, dim in dims.items())
          + f" (total {total})")
    print(f"training MSE: {ranker.model_.train_mse_:.6f}")
    bundle_mod.save_bundle(ranker, args.out)
    print(f"bundle written to {args.out}")
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    ranker = bundle_mod.load_bundle(args.bundle,
                                    vector_store_path=args.vector_store)
    debates = corpus_mod.load_debates_dir(args.input_dir, labeled=args.labeled)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not debates:
        print(f"warning: no *.tsv files in {args.input_dir}", file=sys.stderr)
        return EXIT_OK
    for debate in debates:
        entries = ranker.rank_debate(debate)
        out_path = out_dir / f"{debate.debate_id}.run"
        corpus_mod.write_run(debate, entries, out_path)
        print(f"ranked {debate.debate_id}: {len(entries)} sentences "
              f"-> {out_path}")
    return EXIT_OK


def _evaluate_dirs(gold_dir: Path, run_dir: Path) -> metrics_mod.MetricsReport:
    gold_lines = {
        debate.debate_id: set(debate.line_numbers())
        for debate in corpus_mod.load_debates_dir(gold_dir, labeled=True)}
    judgments = _gold_judgments(gold_dir)
    runs = {}
    for path in sorted(Path(run_dir).glob("*.run")):
        entries = corpus_mod.read_run(path)
        lines = [e.line_number for e in entries]
        expected = gold_lines.get(path.stem)
        if expected is not None and set(lines) != expected:
            raise CoverageError(
                f"{path}: run is not a permutation of debate "
                f"{path.stem!r}: missing {sorted(expected - set(lines))}, "
                f"extra {sorted(set(lines) - expected)}")
        runs[path.stem] = lines
    return metrics_mod.evaluate_run(runs, judgments)


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = _evaluate_dirs(Path(args.gold_dir), Path(args.run_dir))
    print(metrics_mod.MetricsReport.header())
    print(report.format_row(label=Path(args.run_dir).name))
    for query_id in report.no_relevant_queries:
        print(f"warning: query {query_id} has no relevant sentences",
              file=sys.stderr)
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    import tempfile

    base_config = _load_config(args)
    if not base_config.test_dir:
        raise ConfigError("ablation needs a labeled test directory")
    subsets = [s.strip() for s in args.subsets.split(",") if s.strip()]
    if not subsets:
        raise ConfigError("no feature subsets given")
    judgments_dir = Path(base_config.test_dir)
    test_debates = corpus_mod.load_debates_dir(judgments_dir, labeled=True)
    if not test_debates:
        raise ConfigError(f"no *.tsv files in {judgments_dir}")
    judgments = _gold_judgments(judgments_dir)

    rows = []
    for subset in subsets:
        features = config_mod.parse_feature_list(subset.replace("+", ","))
        sub_config = config_mod.load_config(
            getattr(args, "config", None),
            overrides={**_config_overrides(args), "features": features})
        ranker = _train_ranker(sub_config)
        runs = {}
        with tempfile.TemporaryDirectory() as scratch:
            for debate in test_debates:
                entries = ranker.rank_debate(debate)
                out_path = Path(scratch) / f"{debate.debate_id}.run"
                corpus_mod.write_run(debate, entries, out_path)
                runs[debate.debate_id] = [
                    e.line_number for e in corpus_mod.read_run(out_path)]
        name = "+".join(features)
        rows.append((name, metrics_mod.evaluate_run(runs, judgments)))

    baseline = args.baseline
    if baseline:
        # row names are canonicalized, so canonicalize the flag too
        baseline = "+".join(
            config_mod.parse_feature_list(baseline.replace("+", ",")))
    report = metrics_mod.ablation_report(rows, baseline=baseline)
    print(report.format())
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.vector_store_path:
        raise ConfigError("augmentation needs vector_store_path (word vectors)")
    store = embeddings_mod.load_vector_file(config.vector_store_path)
    tagger = (augment_mod.SidecarTagger.load(config.pos_sidecar_path)
              if config.pos_sidecar_path else augment_mod.FallbackTagger())
    debates = corpus_mod.load_debates_dir(args.train_dir, labeled=True)
    if not debates:
        raise ConfigError(f"no *.tsv files in {args.train_dir}")
    result = augment_mod.augment_corpus(
        debates, store, tagger, min_sim=config.augment_min_sim,
        max_copies=config.augment_max_copies)
    by_debate: dict[str, list[corpus_mod.SentenceRecord]] = {}
    for record in result.records:
        by_debate.setdefault(record.debate_id, []).append(record)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for debate in debates:
        expanded = corpus_mod.Debate(
            debate_id=debate.debate_id,
            records=debate.records + tuple(by_debate.get(debate.debate_id, [])))
        corpus_mod.write_debate_tsv(expanded, out_dir / f"{debate.debate_id}.tsv")
    print(f"augmented {len(result.records)} sentences across "
          f"{len(debates)} debates -> {out_dir}")
    return EXIT_OK


def cmd_topics_show(args: argparse.Namespace) -> int:
    loaded = bundle_mod.load_bundle(args.bundle)
    tmf = loaded.assembler.extractors.get("tmf")
    if tmf is None:
        raise ConfigError("bundle was trained without topic features")
    for topic_index, row in enumerate(tmf.top_word_table()):
        cells = "  ".join(f"{word}:{score:.4f}" for word, score in row)
        print(f"topic {topic_index:3d}  {cells}")
    return EXIT_OK


def cmd_embed_cache(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not config.service_url:
        raise ConfigError("embed cache needs a service URL "
                          f"(flag, {embeddings_mod.SERVICE_URL_ENV}, or config)")
    backend = embeddings_mod.ServiceBackend(
        url=config.service_url, dim=config.embedding_dim,
        timeout=config.service_timeout, retries=config.service_retries,
        parallelism=config.service_parallelism,
        batch_size=config.service_batch_size)
    debates = corpus_mod.load_debates_dir(args.input_dir, labeled=args.labeled)
    if not debates:
        raise ConfigError(f"no *.tsv files in {args.input_dir}")
    texts = [record.text for debate in debates for record in debate.records]
    store = embeddings_mod.build_text_store(texts, backend)
    embeddings_mod.save_vector_file(store, args.out)
    print(f"cached {len(store)} vectors (dim {store.dim}) -> {args.out}")
    return EXIT_OK


def _add_common_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="pipeline RNG seed")
    parser.add_argument(
        "--features",
        help="comma-separated feature blocks: sbert,sf,tmf,bigrams")
    parser.add_argument("--lexicon", help="sentiment lexicon TSV")
    parser.add_argument("--stoplist", help="stoplist file")
    parser.add_argument("--embedding-backend",
                        choices=["fallback", "store", "service"])
    parser.add_argument("--embedding-dim", type=int)
    parser.add_argument("--vector-store", help="CLRK vector file")
    parser.add_argument("--service-url", help="embedding service base URL")
    parser.add_argument("--trees", type=int, help="boosting stages")
    parser.add_argument("--leaves", type=int, help="max leaves per tree")
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--min-leaf", type=int)
    parser.add_argument("--topics-k", type=int)
    parser.add_argument("--topics-top-n", type=int)
    parser.add_argument("--topics-iterations", type=int)
    parser.add_argument("--bigram-threshold", type=int)
    parser.add_argument("--rules", action="store_true",
                        help="enable demotion rules")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="checkrank",
        description="Rank transcript sentences by check-worthiness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="sanity-check a corpus directory")
    p.add_argument("corpus_dir")
    p.add_argument("--unlabeled", action="store_true",
                   help="treat files as 3-column (no labels)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="fit extractors and model, write bundle")
    p.add_argument("--train-dir", required=False)
    p.add_argument("--out", required=True, help="bundle output path")
    _add_common_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="score debates with a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--input-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--labeled", action="store_true",
                   help="input files carry labels (ignored for scoring)")
    p.add_argument("--vector-store", help="override bundled store path")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="score run files against gold labels")
    p.add_argument("--gold-dir", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--json-out", help="also write a JSON report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate",
                       help="train and evaluate several feature subsets")
    p.add_argument("--train-dir", required=False)
    p.add_argument("--test-dir", required=False)
    p.add_argument("--subsets", required=True,
                   help="comma-separated subsets, blocks joined by '+', "
                        "e.g. 'sf,sbert+sf'")
    p.add_argument("--baseline", help="baseline subset name (default: first)")
    p.add_argument("--json-out", help="also write a JSON report")
    _add_common_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("augment", help="expand a labeled corpus by "
                                       "similar-word substitution")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-sim", type=float)
    p.add_argument("--max-copies", type=int)
    p.add_argument("--pos-sidecar", help="sidecar POS tag TSV")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--vector-store", help="word-vector CLRK file")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("topics", help="inspect topic state")
    topics_sub = p.add_subparsers(dest="topics_command", required=True)
    p_show = topics_sub.add_parser("show", help="print the topic top-word table")
    p_show.add_argument("--bundle", required=True)
    p_show.set_defaults(func=cmd_topics_show)

    p = sub.add_parser("embed", help="embedding utilities")
    embed_sub = p.add_subparsers(dest="embed_command", required=True)
    p_cache = embed_sub.add_parser(
        "cache", help="embed a corpus via the HTTP service into a CLRK file")
    p_cache.add_argument("--input-dir", required=True)
    p_cache.add_argument("--out", required=True)
    p_cache.add_argument("--labeled", action="store_true")
    p_cache.add_argument("--config", help="JSON config file")
    p_cache.add_argument("--service-url")
    p_cache.add_argument("--embedding-dim", type=int)
    p_cache.set_defaults(func=cmd_embed_cache)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (CheckrankError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
