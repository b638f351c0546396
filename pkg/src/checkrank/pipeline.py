"""Feature extraction blocks and the end-to-end ranking estimator.

Every feature block is a transformer over sentence records: ``fit``
learns whatever corpus state the block needs (selected bigrams, a topic
model), ``transform`` maps records to a numeric block. The assembler
concatenates enabled blocks in a fixed order and maintains the feature
manifest; the :class:`CheckWorthinessRanker` couples an assembler with a
boosted-tree scorer and optional demotion rules.

Block order is fixed as embeddings, sentiment, topic scores, bigram
counts; a model's manifest always lists slots in that order.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import sentiment as sentiment_mod
from . import textproc
from . import topics as topics_mod
from .corpus import Debate, RunEntry, SentenceRecord
from .embeddings import Backend, HashEmbedder, embed_batch
from .errors import ConfigError, ContractError
from .ranker import (GbrtRanker, RerankRule, apply_rerank_rules,
                     min_token_count_rule, no_signal_rule)

BLOCK_ORDER = ("sbert", "sf", "tmf", "bigrams")


def _records_of(debates: Sequence[Debate]) -> list[SentenceRecord]:
    return [record for debate in debates for record in debate.records]


def _require_labels(records: Sequence[SentenceRecord]) -> np.ndarray:
    labels = []
    for record in records:
        if record.label is None:
            raise ContractError(
                f"training needs labels; "
                f"{record.debate_id}:{record.line_number} has none")
        labels.append(record.label)
    return np.asarray(labels, dtype=np.float64)


class EmbeddingFeatures(BaseEstimator, TransformerMixin):
    """Sentence-vector block served by any embedding backend."""

    block = "sbert"

    def __init__(self, backend: Optional[Backend] = None):
        self.backend = backend

    def fit(self, debates: Sequence[Debate], y=None):
        backend = self.backend if self.backend is not None else HashEmbedder()
        self.backend_ = backend
        self.feature_names_ = [f"emb_{i}" for i in range(backend.dim)]
        return self

    def transform(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        vectors = embed_batch([r.text for r in records], self.backend_)
        if not vectors:
            return np.zeros((0, self.backend_.dim))
        return np.vstack(vectors)


class SentimentFeatures(BaseEstimator, TransformerMixin):
    """Three-slot block of (neg, neu, pos) lexicon proportions.

    Scoring runs over raw tokens (stopwords kept) so the neutral mass
    reflects the whole sentence.
    """

    block = "sf"

    def __init__(self, lexicon: Optional[sentiment_mod.SentimentLexicon] = None):
        self.lexicon = lexicon

    def fit(self, debates: Sequence[Debate], y=None):
        self.lexicon_ = (self.lexicon if self.lexicon is not None
                         else sentiment_mod.load_lexicon())
        self.feature_names_ = list(sentiment_mod.FEATURE_NAMES)
        return self

    def transform(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        rows = [sentiment_mod.score_sentence(
            textproc.tokenize(r.text), self.lexicon_).as_tuple()
            for r in records]
        return np.asarray(rows, dtype=np.float64).reshape(len(records), 3)


class TopicFeatures(BaseEstimator, TransformerMixin):
    """Topic-word score block.

    Fitting trains a topic model on the check-worthy (label 1) sentences
    only, stopword- and punctuation-filtered, then keeps each topic's top
    words as the feature vocabulary.
    """

    block = "tmf"

    def __init__(self, n_topics: int = topics_mod.DEFAULT_TOPIC_COUNT,
                 top_n: int = topics_mod.DEFAULT_TOP_WORDS,
                 alpha: Optional[float] = None,
                 beta: float = topics_mod.DEFAULT_BETA,
                 iterations: int = topics_mod.DEFAULT_ITERATIONS,
                 seed: int = 0,
                 stoplist: Optional[frozenset[str]] = None):
        self.n_topics = n_topics
        self.top_n = top_n
        self.alpha = alpha
        self.beta = beta
        self.iterations = iterations
        self.seed = seed
        self.stoplist = stoplist

    def _tokens(self, text: str) -> list[str]:
        return textproc.tokenize(text, drop_stopwords=True,
                                 stoplist=self.stoplist_)

    def fit(self, debates: Sequence[Debate], y=None):
        self.stoplist_ = (self.stoplist if self.stoplist is not None
                          else textproc.load_stoplist())
        positive_docs = [self._tokens(record.text)
                         for debate in debates
                         for record in debate.records
                         if record.label == 1]
        if not positive_docs:
            raise ContractError(
                "topic features need at least one check-worthy sentence")
        dictionary = topics_mod.build_dictionary(positive_docs)
        bows = [topics_mod.to_bow(doc, dictionary) for doc in positive_docs]
        self.model_ = topics_mod.fit_lda(
            bows, n_topics=self.n_topics, alpha=self.alpha, beta=self.beta,
            iterations=self.iterations, seed=self.seed,
            dictionary=dictionary)
        self.vocab_ = topics_mod.build_topic_feature_vocab(
            self.model_, top_n=self.top_n)
        self.feature_names_ = [f"topic_{w}" for w in self.vocab_.words()]
        return self

    def transform(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        rows = [topics_mod.topic_feature_vector(
            self._tokens(r.text), self.vocab_) for r in records]
        return np.asarray(rows, dtype=np.float64).reshape(
            len(records), len(self.vocab_))

    def top_word_table(self) -> list[list[tuple[str, float]]]:
        """Per-topic top words, for display and the model bundle."""
        return [topics_mod.top_words(self.model_, k, self.top_n)
                for k in range(self.model_.n_topics)]


class BigramFeatures(BaseEstimator, TransformerMixin):
    """Two-slot block counting hits on class-exclusive bigrams."""

    block = "bigrams"

    def __init__(self, threshold: int = textproc.DEFAULT_BIGRAM_THRESHOLD):
        self.threshold = threshold

    def fit(self, debates: Sequence[Debate], y=None):
        self.bigrams_ = textproc.select_discriminative_bigrams(
            debates, threshold=self.threshold)
        self.feature_names_ = ["bigram_cw_count", "bigram_ncw_count"]
        return self

    def transform(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        rows = [textproc.bigram_match_counts(
            textproc.tokenize(r.text), self.bigrams_) for r in records]
        return np.asarray(rows, dtype=np.float64).reshape(len(records), 2)


EXTRACTOR_TYPES = {
    "sbert": EmbeddingFeatures,
    "sf": SentimentFeatures,
    "tmf": TopicFeatures,
    "bigrams": BigramFeatures,
}


class FeatureAssembler(BaseEstimator, TransformerMixin):
    """Concatenate enabled feature blocks in canonical order.

    ``extractors`` maps block name to a transformer instance; any subset
    of :data:`BLOCK_ORDER` is accepted but at least one block must be
    enabled. After ``fit`` the manifest (ordered feature names) and the
    block spans are available.
    """

    def __init__(self, extractors: dict[str, TransformerMixin]):
        self.extractors = extractors

    def _ordered(self) -> list[tuple[str, TransformerMixin]]:
        unknown = set(self.extractors) - set(BLOCK_ORDER)
        if unknown:
            raise ConfigError(f"unknown feature blocks: {sorted(unknown)}")
        if not self.extractors:
            raise ConfigError("at least one feature block must be enabled")
        return [(name, self.extractors[name])
                for name in BLOCK_ORDER if name in self.extractors]

    def fit(self, debates: Sequence[Debate], y=None):
        manifest: list[str] = []
        spans: dict[str, tuple[int, int]] = {}
        for name, extractor in self._ordered():
            extractor.fit(debates)
            start = len(manifest)
            manifest.extend(extractor.feature_names_)
            spans[name] = (start, len(manifest))
        self.manifest_ = manifest
        self.blocks_ = spans
        return self

    def transform(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        blocks = [extractor.transform(records)
                  for _, extractor in self._ordered()]
        matrix = np.hstack(blocks) if blocks else np.zeros((len(records), 0))
        if matrix.shape != (len(records), len(self.manifest_)):
            raise ContractError(
                f"assembled matrix {matrix.shape} does not match the "
                f"manifest of {len(self.manifest_)} features")
        if not np.all(np.isfinite(matrix)):
            raise ContractError("assembled features contain non-finite values")
        return matrix

    def block_dims(self) -> dict[str, int]:
        return {name: stop - start
                for name, (start, stop) in self.blocks_.items()}


def default_rules(min_tokens: int,
                  topic_words: Sequence[str],
                  bigrams) -> list[RerankRule]:
    return [min_token_count_rule(min_tokens),
            no_signal_rule(topic_words, bigrams)]


class CheckWorthinessRanker(BaseEstimator):
    """Full scorer: assembled features into a boosted-tree model.

    ``fit`` takes labeled debates; ``predict`` scores records;
    ``rank_debate`` produces a complete run for one debate, applying the
    demotion rules when enabled.
    """

    def __init__(self, assembler: FeatureAssembler,
                 model: Optional[GbrtRanker] = None,
                 rules_enabled: bool = False,
                 rule_min_tokens: int = 3):
        self.assembler = assembler
        self.model = model
        self.rules_enabled = rules_enabled
        self.rule_min_tokens = rule_min_tokens

    def fit(self, debates: Sequence[Debate], y=None):
        records = _records_of(debates)
        labels = _require_labels(records)
        self.assembler.fit(debates)
        X = self.assembler.transform(records)
        self.model_ = self.model if self.model is not None else GbrtRanker()
        self.model_.fit(X, labels, feature_names=self.assembler.manifest_)
        self.rules_ = self._build_rules()
        return self

    def _build_rules(self) -> list[RerankRule]:
        if not self.rules_enabled:
            return []
        topic_words: list[str] = []
        tmf = self.assembler.extractors.get("tmf")
        if tmf is not None and hasattr(tmf, "vocab_"):
            topic_words = tmf.vocab_.words()
        bigrams = None
        bigram_block = self.assembler.extractors.get("bigrams")
        if bigram_block is not None and hasattr(bigram_block, "bigrams_"):
            bigrams = bigram_block.bigrams_
        if bigrams is None:
            bigrams = textproc.BigramSet(frozenset(), frozenset(), threshold=1)
        return default_rules(self.rule_min_tokens, topic_words, bigrams)

    def predict(self, records: Sequence[SentenceRecord]) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise ContractError("ranker is not fitted")
        X = self.assembler.transform(records)
        return self.model_.predict(X)

    def rank_debate(self, debate: Debate) -> list[RunEntry]:
        scores = self.predict(debate.records)
        tokens = [textproc.tokenize(r.text) for r in debate.records]
        return apply_rerank_rules(debate, list(scores), self.rules_, tokens)

    def block_dims(self) -> dict[str, int]:
        return self.assembler.block_dims()
