"""Check-worthiness ranking for debate transcripts.

Parses per-debate transcript files, extracts sentence features
(embeddings, sentiment proportions, topic-word scores, discriminative
bigram counts), trains a gradient-boosted regression-tree scorer, and
evaluates ranked runs with MAP, MRR, R-Precision, and Precision@N.
"""

from .augment import (FallbackTagger, PosTaggedSentence, SidecarTagger,
                      augment_corpus, augment_sentence, tag_tokens)
from .bundle import load_bundle, save_bundle
from .config import PipelineConfig, build_ranker, load_config
from .corpus import (Debate, RunEntry, SentenceRecord, ValidationReport,
                     load_debates_dir, parse_debate_tsv, read_run,
                     validate_corpus, write_run)
from .embeddings import (HashEmbedder, ServiceBackend, StoreBackend,
                         VectorStore, embed_batch, load_vector_file,
                         nearest_word, save_vector_file)
from .errors import (CheckrankError, ConfigError, ContractError,
                     CoverageError, FormatError, MissingAnnotationError,
                     MissingKeyError, ParseError, TransportError)
from .metrics import (AblationReport, MetricsReport, QueryJudgments,
                      ablation_report, average_precision, evaluate_run,
                      precision_at_n, r_precision, reciprocal_rank)
from .pipeline import (BigramFeatures, CheckWorthinessRanker,
                       EmbeddingFeatures, FeatureAssembler,
                       SentimentFeatures, TopicFeatures)
from .ranker import GbrtRanker, RegressionTree, RerankRule, apply_rerank_rules
from .sentiment import SentimentLexicon, load_lexicon, score_sentence
from .textproc import (BigramSet, extract_bigrams, load_stoplist,
                       select_discriminative_bigrams, tokenize)
from .topics import (Dictionary, TopicFeatureVocab, TopicModel,
                     build_dictionary, build_topic_feature_vocab, fit_lda,
                     top_words, topic_feature_vector)

__version__ = "0.1.0"

__all__ = [
    "AblationReport", "BigramFeatures", "BigramSet", "CheckWorthinessRanker",
    "CheckrankError", "ConfigError", "ContractError", "CoverageError",
    "Debate", "Dictionary", "EmbeddingFeatures", "FallbackTagger",
    "FeatureAssembler", "FormatError", "GbrtRanker", "HashEmbedder",
    "MetricsReport", "MissingAnnotationError", "MissingKeyError",
    "ParseError", "PipelineConfig", "PosTaggedSentence", "QueryJudgments",
    "RegressionTree", "RerankRule", "RunEntry", "SentenceRecord",
    "SentimentFeatures", "SentimentLexicon", "ServiceBackend",
    "SidecarTagger", "StoreBackend", "TopicFeatureVocab", "TopicFeatures",
    "TopicModel", "TransportError", "ValidationReport", "VectorStore",
    "ablation_report", "apply_rerank_rules", "augment_corpus",
    "augment_sentence", "average_precision", "build_dictionary",
    "build_ranker", "build_topic_feature_vocab", "embed_batch",
    "evaluate_run", "extract_bigrams", "fit_lda", "load_bundle",
    "load_config", "load_debates_dir", "load_lexicon", "load_stoplist",
    "load_vector_file", "nearest_word", "parse_debate_tsv",
    "precision_at_n", "r_precision", "read_run", "reciprocal_rank",
    "save_bundle", "save_vector_file", "score_sentence",
    "select_discriminative_bigrams", "tag_tokens", "tokenize",
    "top_words", "topic_feature_vector", "validate_corpus", "write_run",
]
