"""Tokenization, stopword filtering, and discriminative bigram selection.

A token is a maximal run of Unicode letters and digits, lowercased, with
apostrophes dropped first ("don't" becomes "dont"). The stoplist file
format is UTF-8, one word per line, with ``#`` starting a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .corpus import Debate
from .errors import ContractError

# Letters and digits only: \w minus underscore. Apostrophes are removed
# before matching so contractions stay one token.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_APOSTROPHES = str.maketrans("", "", "'’")

CHECKWORTHY_SIDE = "checkworthy-only"
NON_CHECKWORTHY_SIDE = "non-checkworthy-only"

DEFAULT_BIGRAM_THRESHOLD = 50


def load_stoplist(path: Optional[str | Path] = None) -> frozenset[str]:
    """Load a stoplist file; with no path, the bundled default list."""
    if path is None:
        text = (resources.files("checkrank.data") / "stopwords.txt"
                ).read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


def tokenize(text: str, drop_stopwords: bool = False,
             stoplist: Optional[frozenset[str]] = None) -> list[str]:
    """Split ``text`` into lowercase word tokens.

    Punctuation never survives; with ``drop_stopwords`` set, tokens found
    in ``stoplist`` (the bundled default when omitted) are removed too.
    Empty text gives an empty list.
    """
    tokens = _TOKEN_RE.findall(text.translate(_APOSTROPHES).lower())
    if drop_stopwords:
        if stoplist is None:
            stoplist = load_stoplist()
        tokens = [t for t in tokens if t not in stoplist]
    return tokens


def extract_bigrams(tokens: list[str]) -> list[tuple[str, str]]:
    """Adjacent token pairs in order; duplicates preserved."""
    return list(zip(tokens, tokens[1:]))


@dataclass(frozen=True)
class BigramSet:
    """Bigrams that appear frequently and exclusively in one label class."""

    checkworthy: frozenset[tuple[str, str]]
    non_checkworthy: frozenset[tuple[str, str]]
    threshold: int

    def side_of(self, bigram: tuple[str, str]) -> Optional[str]:
        if bigram in self.checkworthy:
            return CHECKWORTHY_SIDE
        if bigram in self.non_checkworthy:
            return NON_CHECKWORTHY_SIDE
        return None

    def __len__(self) -> int:
        return len(self.checkworthy) + len(self.non_checkworthy)


def select_discriminative_bigrams(
        debates: Iterable[Debate],
        threshold: int = DEFAULT_BIGRAM_THRESHOLD) -> BigramSet:
    """Select bigrams occurring at least ``threshold`` times in exactly one
    label class of a labeled corpus.

    Counting runs over raw lowercased tokens (stopwords kept), duplicates
    included. A bigram seen even once in the opposite class is dropped.
    Any unlabeled record is a contract violation.
    """
    if threshold < 1:
        raise ContractError(f"threshold must be >= 1, got {threshold}")
    counts: dict[tuple[str, str], list[int]] = {}
    saw_record = False
    for debate in debates:
        for record in debate.records:
            saw_record = True
            if record.label is None:
                raise ContractError(
                    "bigram selection needs a labeled corpus; "
                    f"{debate.debate_id}:{record.line_number} has no label")
            for bigram in extract_bigrams(tokenize(record.text)):
                pair = counts.setdefault(bigram, [0, 0])
                pair[record.label] += 1
    if not saw_record:
        raise ContractError("bigram selection needs a non-empty corpus")
    checkworthy = frozenset(
        b for b, (neg, pos) in counts.items() if pos >= threshold and neg == 0)
    non_checkworthy = frozenset(
        b for b, (neg, pos) in counts.items() if neg >= threshold and pos == 0)
    return BigramSet(checkworthy=checkworthy,
                     non_checkworthy=non_checkworthy,
                     threshold=threshold)


def bigram_match_counts(tokens: list[str], bigrams: BigramSet) -> tuple[int, int]:
    """Count bigram occurrences in ``tokens`` that hit each selected side.

    Returns ``(checkworthy_hits, non_checkworthy_hits)``; every occurrence
    counts, not just distinct bigrams.
    """
    cw = ncw = 0
    for bigram in extract_bigrams(tokens):
        if bigram in bigrams.checkworthy:
            cw += 1
        elif bigram in bigrams.non_checkworthy:
            ncw += 1
    return cw, ncw
