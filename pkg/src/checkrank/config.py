"""Pipeline configuration: one JSON file, overridable by CLI flags.

Precedence is flag > file > built-in default; the embedding-service URL
additionally reads the ``CHECKRANK_EMBED_URL`` environment variable
between flag and file. :func:`build_ranker` turns a resolved config into
an unfitted estimator ready for ``fit``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import textproc, topics
from .embeddings import (DEFAULT_BATCH_SIZE, DEFAULT_DIMENSION,
                         DEFAULT_PARALLELISM, DEFAULT_RETRIES,
                         DEFAULT_TIMEOUT, SERVICE_URL_ENV, HashEmbedder,
                         ServiceBackend, StoreBackend, load_vector_file)
from .errors import ConfigError
from .pipeline import (BLOCK_ORDER, BigramFeatures, CheckWorthinessRanker,
                       EmbeddingFeatures, FeatureAssembler, SentimentFeatures,
                       TopicFeatures)
from .ranker import (DEFAULT_LEARNING_RATE, DEFAULT_LEAVES, DEFAULT_MIN_LEAF,
                     DEFAULT_TREES, GbrtRanker)
from .sentiment import load_lexicon


@dataclass
class PipelineConfig:
    """Everything a train/rank/ablate run needs, with defaults."""

    features: tuple[str, ...] = BLOCK_ORDER
    seed: int = 0

    train_dir: Optional[str] = None
    test_dir: Optional[str] = None
    lexicon_path: Optional[str] = None
    stoplist_path: Optional[str] = None

    embedding_backend: str = "fallback"      # fallback | store | service
    embedding_dim: int = DEFAULT_DIMENSION
    vector_store_path: Optional[str] = None
    service_url: Optional[str] = None
    service_timeout: float = DEFAULT_TIMEOUT
    service_retries: int = DEFAULT_RETRIES
    service_parallelism: int = DEFAULT_PARALLELISM
    service_batch_size: int = DEFAULT_BATCH_SIZE

    n_trees: int = DEFAULT_TREES
    n_leaves: int = DEFAULT_LEAVES
    learning_rate: float = DEFAULT_LEARNING_RATE
    min_leaf: int = DEFAULT_MIN_LEAF

    topics_k: int = topics.DEFAULT_TOPIC_COUNT
    topics_top_n: int = topics.DEFAULT_TOP_WORDS
    topics_alpha: Optional[float] = None
    topics_beta: float = topics.DEFAULT_BETA
    topics_iterations: int = topics.DEFAULT_ITERATIONS

    bigram_threshold: int = textproc.DEFAULT_BIGRAM_THRESHOLD

    rules_enabled: bool = False
    rule_min_tokens: int = 3

    augment_min_sim: float = 0.5
    augment_max_copies: int = 1
    pos_sidecar_path: Optional[str] = None

    def validate(self) -> "PipelineConfig":
        unknown = set(self.features) - set(BLOCK_ORDER)
        if unknown:
            raise ConfigError(
                f"unknown feature blocks {sorted(unknown)}; "
                f"valid blocks are {list(BLOCK_ORDER)}")
        if not self.features:
            raise ConfigError("at least one feature block must be enabled")
        if self.embedding_backend not in ("fallback", "store", "service"):
            raise ConfigError(
                f"unknown embedding backend {self.embedding_backend!r}")
        if self.embedding_dim < 1:
            raise ConfigError(
                f"embedding_dim must be >= 1, got {self.embedding_dim}")
        return self


_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def parse_feature_list(flag_value: str) -> tuple[str, ...]:
    """Parse a ``sbert,sf,tmf,bigrams`` style flag into canonical order."""
    wanted = {part.strip().lower()
              for part in flag_value.split(",") if part.strip()}
    unknown = wanted - set(BLOCK_ORDER)
    if unknown:
        raise ConfigError(
            f"unknown feature blocks {sorted(unknown)}; "
            f"valid blocks are {list(BLOCK_ORDER)}")
    if not wanted:
        raise ConfigError("feature list is empty")
    return tuple(name for name in BLOCK_ORDER if name in wanted)


def load_config(path: Optional[str | Path] = None,
                overrides: Optional[dict] = None) -> PipelineConfig:
    """Build a config from an optional JSON file plus explicit overrides."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        unknown = set(raw) - _FIELD_NAMES
        if unknown:
            raise ConfigError(
                f"config {path} has unknown keys: {sorted(unknown)}")
        values.update(raw)
    env_url = os.environ.get(SERVICE_URL_ENV)
    if env_url:
        values["service_url"] = env_url
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    if "features" in values and not isinstance(values["features"], tuple):
        feats = values["features"]
        if isinstance(feats, str):
            values["features"] = parse_feature_list(feats)
        else:
            values["features"] = parse_feature_list(",".join(feats))
    try:
        config = PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return config.validate()


def build_embedding_backend(config: PipelineConfig):
    if config.embedding_backend == "fallback":
        return HashEmbedder(dim=config.embedding_dim)
    if config.embedding_backend == "store":
        if not config.vector_store_path:
            raise ConfigError("store backend needs vector_store_path")
        store = load_vector_file(config.vector_store_path)
        if store.dim != config.embedding_dim:
            raise ConfigError(
                f"vector store dimension {store.dim} does not match "
                f"configured dimension {config.embedding_dim}")
        backend = StoreBackend(store)
        backend.source_path = str(config.vector_store_path)
        return backend
    url = config.service_url
    if not url:
        raise ConfigError(
            f"service backend needs a URL (flag, {SERVICE_URL_ENV}, or config)")
    return ServiceBackend(
        url=url, dim=config.embedding_dim, timeout=config.service_timeout,
        retries=config.service_retries, parallelism=config.service_parallelism,
        batch_size=config.service_batch_size)


def build_ranker(config: PipelineConfig) -> CheckWorthinessRanker:
    """Assemble an unfitted estimator from a validated config."""
    stoplist = (textproc.load_stoplist(config.stoplist_path)
                if config.stoplist_path else textproc.load_stoplist())
    extractors: dict = {}
    if "sbert" in config.features:
        extractors["sbert"] = EmbeddingFeatures(
            backend=build_embedding_backend(config))
    if "sf" in config.features:
        extractors["sf"] = SentimentFeatures(
            lexicon=load_lexicon(config.lexicon_path))
    if "tmf" in config.features:
        extractors["tmf"] = TopicFeatures(
            n_topics=config.topics_k, top_n=config.topics_top_n,
            alpha=config.topics_alpha, beta=config.topics_beta,
            iterations=config.topics_iterations, seed=config.seed,
            stoplist=stoplist)
    if "bigrams" in config.features:
        extractors["bigrams"] = BigramFeatures(
            threshold=config.bigram_threshold)
    model = GbrtRanker(
        n_trees=config.n_trees, n_leaves=config.n_leaves,
        learning_rate=config.learning_rate, min_leaf=config.min_leaf,
        random_state=config.seed)
    return CheckWorthinessRanker(
        assembler=FeatureAssembler(extractors), model=model,
        rules_enabled=config.rules_enabled,
        rule_min_tokens=config.rule_min_tokens)
