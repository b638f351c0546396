"""Topic modeling over check-worthy sentences and topic-word features.

Inference is collapsed Gibbs sampling: per-token topic assignments are
resampled from their full conditional while the mixture parameters stay
integrated out. The sampler is single-threaded on purpose; for a fixed
(documents, K, alpha, beta, iterations, seed) tuple it is bit-reproducible,
which the model bundle format relies on.

The per-sentence feature is built from the union of each topic's top
words: a sentence gets a word's score (its best topic-word probability)
in that word's slot when the word is present, 0 otherwise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import ContractError

DEFAULT_TOPIC_COUNT = 40
DEFAULT_TOP_WORDS = 5
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000


class Dictionary:
    """Bijective word <-> dense integer id map, ids in first-occurrence order."""

    def __init__(self) -> None:
        self.id_of: dict[str, int] = {}
        self.word_of: list[str] = []

    @classmethod
    def build(cls, docs: Iterable[Sequence[str]]) -> "Dictionary":
        d = cls()
        for doc in docs:
            for word in doc:
                d.add(word)
        return d

    def add(self, word: str) -> int:
        word_id = self.id_of.get(word)
        if word_id is None:
            word_id = len(self.word_of)
            self.id_of[word] = word_id
            self.word_of.append(word)
        return word_id

    def __len__(self) -> int:
        return len(self.word_of)

    def __contains__(self, word: str) -> bool:
        return word in self.id_of


def build_dictionary(docs: Iterable[Sequence[str]]) -> Dictionary:
    return Dictionary.build(docs)


def to_bow(tokens: Sequence[str], dictionary: Dictionary,
           allow_unknown: bool = False) -> dict[int, int]:
    """Bag-of-words counts for one document.

    Unknown words raise unless ``allow_unknown``, in which case they are
    silently skipped (used when featurizing test sentences).
    """
    counts: dict[int, int] = {}
    for token in tokens:
        word_id = dictionary.id_of.get(token)
        if word_id is None:
            if allow_unknown:
                continue
            raise ContractError(f"word {token!r} is not in the dictionary")
        counts[word_id] = counts.get(word_id, 0) + 1
    return counts


@dataclass(frozen=True)
class TopicModel:
    """Smoothed topic-word distributions from a finished sampler state."""

    n_topics: int
    vocab_size: int
    phi: tuple[tuple[float, ...], ...]
    alpha: float
    beta: float
    iterations: int
    seed: int
    dictionary_words: tuple[str, ...]

    def word(self, word_id: int) -> str:
        return self.dictionary_words[word_id]


def fit_lda(docs: Sequence[dict[int, int]], n_topics: int,
            alpha: Optional[float] = None, beta: float = DEFAULT_BETA,
            iterations: int = DEFAULT_ITERATIONS, seed: int = 0,
            dictionary: Optional[Dictionary] = None) -> TopicModel:
    """Fit topic-word distributions by collapsed Gibbs sampling.

    ``docs`` are bag-of-words maps over a shared dictionary. ``alpha``
    defaults to 50/K. The returned phi rows are the smoothed topic-word
    frequencies of the final sampler state:

        phi[k][w] = (n_kw + beta) / (n_k + V * beta)

    so each row sums to 1 and every entry is positive.
    """
    if n_topics < 1:
        raise ContractError(f"n_topics must be >= 1, got {n_topics}")
    if iterations < 1:
        raise ContractError(f"iterations must be >= 1, got {iterations}")
    if not docs:
        raise ContractError("cannot fit a topic model on zero documents")
    if dictionary is not None:
        vocab_size = len(dictionary)
    else:
        vocab_size = max((max(d) + 1 for d in docs if d), default=0)
    if vocab_size == 0:
        raise ContractError("cannot fit a topic model on an empty vocabulary")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0 or beta <= 0:
        raise ContractError("alpha and beta must be positive")

    # Expand bags to word-instance lists, ascending word id, for a stable
    # sampling order.
    doc_words: list[list[int]] = []
    for doc in docs:
        words: list[int] = []
        for word_id in sorted(doc):
            if word_id >= vocab_size:
                raise ContractError(
                    f"word id {word_id} outside vocabulary of {vocab_size}")
            count = doc[word_id]
            if count < 1:
                raise ContractError("bag-of-words counts must be >= 1")
            words.extend([word_id] * count)
        doc_words.append(words)

    rng = random.Random(seed)
    k_range = range(n_topics)
    n_kw = [[0] * vocab_size for _ in k_range]
    n_k = [0] * n_topics
    n_dk = [[0] * n_topics for _ in doc_words]
    assignments: list[list[int]] = []

    for d, words in enumerate(doc_words):
        z_d = []
        for w in words:
            k = rng.randrange(n_topics)
            z_d.append(k)
            n_kw[k][w] += 1
            n_k[k] += 1
            n_dk[d][k] += 1
        assignments.append(z_d)

    v_beta = vocab_size * beta
    probs = [0.0] * n_topics
    for _ in range(iterations):
        for d, words in enumerate(doc_words):
            z_d = assignments[d]
            dk = n_dk[d]
            for i, w in enumerate(words):
                k_old = z_d[i]
                n_kw[k_old][w] -= 1
                n_k[k_old] -= 1
                dk[k_old] -= 1
                total = 0.0
                for k in k_range:
                    p = (dk[k] + alpha) * (n_kw[k][w] + beta) / (n_k[k] + v_beta)
                    probs[k] = p
                    total += p
                u = rng.random() * total
                k_new = n_topics - 1
                acc = 0.0
                for k in k_range:
                    acc += probs[k]
                    if u < acc:
                        k_new = k
                        break
                z_d[i] = k_new
                n_kw[k_new][w] += 1
                n_k[k_new] += 1
                dk[k_new] += 1

    phi = tuple(
        tuple((n_kw[k][w] + beta) / (n_k[k] + v_beta)
              for w in range(vocab_size))
        for k in k_range)
    words = tuple(dictionary.word_of) if dictionary is not None else tuple(
        str(w) for w in range(vocab_size))
    return TopicModel(n_topics=n_topics, vocab_size=vocab_size, phi=phi,
                      alpha=alpha, beta=beta, iterations=iterations,
                      seed=seed, dictionary_words=words)


def top_words(model: TopicModel, topic: int, n: int) -> list[tuple[str, float]]:
    """The ``n`` highest-probability words of one topic.

    Ordered by descending probability with ties broken by ascending word
    id; ``n`` beyond the vocabulary is truncated.
    """
    if not 0 <= topic < model.n_topics:
        raise ContractError(
            f"topic {topic} outside [0, {model.n_topics})")
    if n < 0:
        raise ContractError(f"n must be >= 0, got {n}")
    row = model.phi[topic]
    order = sorted(range(model.vocab_size), key=lambda w: (-row[w], w))
    return [(model.word(w), row[w]) for w in order[:n]]


@dataclass(frozen=True)
class TopicFeatureVocab:
    """Deduplicated union of per-topic top words with their scores.

    Entries are ordered by word id. A word topping several topics keeps
    its maximal probability.
    """

    entries: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return [w for w, _ in self.entries]

    def scores(self) -> list[float]:
        return [s for _, s in self.entries]


def build_topic_feature_vocab(model: TopicModel,
                              top_n: int = DEFAULT_TOP_WORDS) -> TopicFeatureVocab:
    """Collect each topic's top ``top_n`` words into one feature vocabulary."""
    best: dict[str, float] = {}
    for topic in range(model.n_topics):
        for word, score in top_words(model, topic, top_n):
            if word not in best or score > best[word]:
                best[word] = score
    id_of = {w: i for i, w in enumerate(model.dictionary_words)}
    ordered = sorted(best, key=lambda w: id_of[w])
    return TopicFeatureVocab(entries=tuple((w, best[w]) for w in ordered))


def topic_feature_vector(tokens: Sequence[str],
                         vocab: TopicFeatureVocab) -> list[float]:
    """Score-or-zero vector over the topic feature vocabulary.

    Presence-based: a word occurring several times contributes its score
    once.
    """
    present = set(tokens)
    return [score if word in present else 0.0
            for word, score in vocab.entries]
