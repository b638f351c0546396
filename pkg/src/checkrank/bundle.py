"""Single-file model bundle.

Layout: 7 magic bytes ``CLRKMDL``, little-endian u32 version, u64 payload
length, then a UTF-8 JSON payload holding the manifest, the fitted trees,
and every extractor's state (selected bigrams, topic vocabulary and
top-word table, sentiment lexicon, embedding settings, stoplist). Floats
survive the JSON round-trip exactly, so a reloaded model predicts
bit-identically; sets are sorted before writing, so rewriting the same
model yields byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

from .embeddings import (HashEmbedder, ServiceBackend, StoreBackend,
                         load_vector_file)
from .errors import ConfigError, FormatError
from .pipeline import (BigramFeatures, CheckWorthinessRanker,
                       EmbeddingFeatures, FeatureAssembler, SentimentFeatures,
                       TopicFeatures)
from .ranker import GbrtRanker, RegressionTree
from .sentiment import SentimentLexicon
from .textproc import BigramSet
from .topics import TopicFeatureVocab, TopicModel

BUNDLE_MAGIC = b"CLRKMDL"
BUNDLE_VERSION = 1


def _tree_state(tree: RegressionTree) -> dict:
    return {
        "feature": tree.feature,
        "threshold": tree.threshold,
        "left": tree.left,
        "right": tree.right,
        "value": tree.value,
    }


def _tree_from_state(state: dict) -> RegressionTree:
    return RegressionTree(
        feature=list(state["feature"]),
        threshold=list(state["threshold"]),
        left=list(state["left"]),
        right=list(state["right"]),
        value=list(state["value"]),
    )


def _embedding_state(extractor: EmbeddingFeatures) -> dict:
    backend = extractor.backend_
    state: dict = {"dim": backend.dim, "kind": backend.name}
    if isinstance(backend, ServiceBackend):
        state["url"] = backend.url
        state["timeout"] = backend.timeout
        state["retries"] = backend.retries
        state["parallelism"] = backend.parallelism
        state["batch_size"] = backend.batch_size
    elif isinstance(backend, StoreBackend):
        state["store_path"] = getattr(backend, "source_path", None)
    return state


def _embedding_from_state(state: dict,
                          vector_store_path: Optional[str]) -> EmbeddingFeatures:
    kind = state["kind"]
    dim = int(state["dim"])
    if kind == "fallback":
        backend = HashEmbedder(dim=dim)
    elif kind == "service":
        backend = ServiceBackend(
            url=state["url"], dim=dim,
            timeout=state.get("timeout", 30.0),
            retries=state.get("retries", 2),
            parallelism=state.get("parallelism", 4),
            batch_size=state.get("batch_size", 32))
    elif kind == "store":
        path = vector_store_path or state.get("store_path")
        if not path:
            raise ConfigError(
                "bundle uses a vector-store backend but records no path; "
                "pass one explicitly")
        store = load_vector_file(path)
        if store.dim != dim:
            raise ConfigError(
                f"vector store dimension {store.dim} does not match "
                f"bundle dimension {dim}")
        backend = StoreBackend(store)
        backend.source_path = str(path)
    else:
        raise FormatError(f"unknown embedding backend kind {kind!r}")
    extractor = EmbeddingFeatures(backend=backend)
    extractor.backend_ = backend
    extractor.feature_names_ = [f"emb_{i}" for i in range(dim)]
    return extractor


def save_bundle(ranker: CheckWorthinessRanker, path: str | Path) -> None:
    """Serialize a fitted ranking pipeline to one bundle file."""
    if not hasattr(ranker, "model_"):
        raise ConfigError("cannot save an unfitted ranker")
    assembler = ranker.assembler
    model = ranker.model_
    payload: dict = {
        "features": [name for name in assembler.blocks_],
        "manifest": assembler.manifest_,
        "blocks": {name: list(span) for name, span in assembler.blocks_.items()},
        "model": {
            "n_trees": model.n_trees,
            "n_leaves": model.n_leaves,
            "learning_rate": model.learning_rate,
            "min_leaf": model.min_leaf,
            "random_state": model.random_state,
            "base_score": model.base_score_,
            "train_mse": model.train_mse_,
            "trees": [_tree_state(t) for t in model.trees_],
        },
        "rules": {
            "enabled": ranker.rules_enabled,
            "min_tokens": ranker.rule_min_tokens,
        },
    }
    extractors = assembler.extractors
    if "sbert" in extractors:
        payload["embedding"] = _embedding_state(extractors["sbert"])
    if "sf" in extractors:
        lexicon = extractors["sf"].lexicon_
        payload["sentiment"] = {
            "lexicon": sorted([w, v] for w, v in lexicon.items()),
        }
    if "tmf" in extractors:
        tmf = extractors["tmf"]
        model = tmf.model_
        payload["topics"] = {
            "top_n": tmf.top_n,
            "model": {
                "n_topics": model.n_topics,
                "vocab_size": model.vocab_size,
                "alpha": model.alpha,
                "beta": model.beta,
                "iterations": model.iterations,
                "seed": model.seed,
                "phi": [list(row) for row in model.phi],
                "dictionary_words": list(model.dictionary_words),
            },
            "vocab": [[w, s] for w, s in tmf.vocab_.entries],
            "stoplist": sorted(tmf.stoplist_),
        }
    if "bigrams" in extractors:
        bigrams = extractors["bigrams"].bigrams_
        payload["bigrams"] = {
            "threshold": bigrams.threshold,
            "checkworthy": sorted(list(b) for b in bigrams.checkworthy),
            "non_checkworthy": sorted(list(b) for b in bigrams.non_checkworthy),
        }

    body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as handle:
        handle.write(BUNDLE_MAGIC)
        handle.write(struct.pack("<IQ", BUNDLE_VERSION, len(body)))
        handle.write(body)


def load_bundle(path: str | Path,
                vector_store_path: Optional[str] = None) -> CheckWorthinessRanker:
    """Reload a bundle into a fitted, ready-to-rank pipeline.

    ``vector_store_path`` overrides the store location recorded in the
    bundle when the embedding backend is store-backed.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(BUNDLE_MAGIC) + 12:
        raise FormatError(f"{path}: truncated bundle header")
    if data[:7] != BUNDLE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:7]!r}")
    version, length = struct.unpack_from("<IQ", data, 7)
    if version != BUNDLE_VERSION:
        raise FormatError(f"{path}: unsupported bundle version {version}")
    if len(data) != 19 + length:
        raise FormatError(f"{path}: payload length mismatch")
    try:
        payload = json.loads(data[19:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable payload: {exc}") from None

    extractors: dict = {}
    if "embedding" in payload:
        extractors["sbert"] = _embedding_from_state(
            payload["embedding"], vector_store_path)
    if "sentiment" in payload:
        lexicon = SentimentLexicon(
            {w: float(v) for w, v in payload["sentiment"]["lexicon"]})
        sf = SentimentFeatures(lexicon=lexicon)
        sf.lexicon_ = lexicon
        sf.feature_names_ = ["sent_neg", "sent_neu", "sent_pos"]
        extractors["sf"] = sf
    if "topics" in payload:
        t = payload["topics"]
        m = t["model"]
        model = TopicModel(
            n_topics=m["n_topics"], vocab_size=m["vocab_size"],
            phi=tuple(tuple(float(x) for x in row) for row in m["phi"]),
            alpha=float(m["alpha"]), beta=float(m["beta"]),
            iterations=m["iterations"], seed=m["seed"],
            dictionary_words=tuple(m["dictionary_words"]))
        tmf = TopicFeatures(
            n_topics=model.n_topics, top_n=t["top_n"], alpha=model.alpha,
            beta=model.beta, iterations=model.iterations, seed=model.seed,
            stoplist=frozenset(t["stoplist"]))
        tmf.stoplist_ = frozenset(t["stoplist"])
        tmf.model_ = model
        tmf.vocab_ = TopicFeatureVocab(
            entries=tuple((w, float(s)) for w, s in t["vocab"]))
        tmf.feature_names_ = [f"topic_{w}" for w in tmf.vocab_.words()]
        extractors["tmf"] = tmf
    if "bigrams" in payload:
        b = payload["bigrams"]
        bigram_block = BigramFeatures(threshold=b["threshold"])
        bigram_block.bigrams_ = BigramSet(
            checkworthy=frozenset(tuple(x) for x in b["checkworthy"]),
            non_checkworthy=frozenset(tuple(x) for x in b["non_checkworthy"]),
            threshold=b["threshold"])
        bigram_block.feature_names_ = ["bigram_cw_count", "bigram_ncw_count"]
        extractors["bigrams"] = bigram_block

    assembler = FeatureAssembler(extractors)
    assembler.manifest_ = list(payload["manifest"])
    assembler.blocks_ = {name: tuple(span)
                         for name, span in payload["blocks"].items()}

    m = payload["model"]
    model = GbrtRanker(
        n_trees=m["n_trees"], n_leaves=m["n_leaves"],
        learning_rate=m["learning_rate"], min_leaf=m["min_leaf"],
        random_state=m["random_state"])
    model.feature_names_ = list(payload["manifest"])
    model.n_features_in_ = len(payload["manifest"])
    model.base_score_ = float(m["base_score"])
    model.train_mse_ = float(m["train_mse"])
    model.trees_ = [_tree_from_state(s) for s in m["trees"]]
    model.mse_path_ = []

    rules = payload.get("rules", {})
    ranker = CheckWorthinessRanker(
        assembler=assembler, model=model,
        rules_enabled=bool(rules.get("enabled", False)),
        rule_min_tokens=int(rules.get("min_tokens", 3)))
    ranker.model_ = model
    ranker.rules_ = ranker._build_rules()
    return ranker
