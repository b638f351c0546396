"""Lexicon-based sentence sentiment proportions.

A lexicon maps lowercase words to valences in [-4, +4]. A sentence is
scored by splitting its token mass into negative, neutral, and positive
parts: tokens missing from the lexicon (or with valence 0) count 1 toward
the neutral part, while a valence v adds |v| to the positive or negative
part. The three parts are normalized to sum to 1, so the scores are
exact, reproducible proportions rather than an opaque analyzer output.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ParseError

VALENCE_MIN = -4.0
VALENCE_MAX = 4.0

FEATURE_NAMES = ("sent_neg", "sent_neu", "sent_pos")


@dataclass(frozen=True)
class SentimentScores:
    neg: float
    neu: float
    pos: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.neg, self.neu, self.pos)


class SentimentLexicon:
    """Immutable word -> valence map."""

    def __init__(self, entries: dict[str, float]):
        self._entries = dict(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def valence(self, word: str) -> Optional[float]:
        return self._entries.get(word)

    def items(self):
        return self._entries.items()

    def negated(self) -> "SentimentLexicon":
        """Lexicon with every valence sign flipped (used by tests)."""
        return SentimentLexicon({w: -v for w, v in self._entries.items()})


def load_lexicon(path: Optional[str | Path] = None) -> SentimentLexicon:
    """Load a ``word \\t valence`` lexicon file.

    Words are lowercased; a word repeated later in the file overwrites the
    earlier valence. Non-numeric or out-of-range valences raise
    :class:`ParseError` with the offending line number. With no path, the
    small lexicon bundled with the package is loaded.
    """
    if path is None:
        text = (resources.files("checkrank.data") / "sentiment_lexicon.tsv"
                ).read_text(encoding="utf-8")
        source = "<bundled lexicon>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    entries: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) != 2:
            raise ParseError(
                f"{source}:{lineno}: expected 'word<TAB>valence', got {raw!r}")
        word = fields[0].strip().lower()
        try:
            valence = float(fields[1])
        except ValueError:
            raise ParseError(
                f"{source}:{lineno}: valence {fields[1]!r} is not a number"
            ) from None
        if not (VALENCE_MIN <= valence <= VALENCE_MAX) or valence != valence:
            raise ParseError(
                f"{source}:{lineno}: valence {valence} outside "
                f"[{VALENCE_MIN}, {VALENCE_MAX}]")
        entries[word] = valence
    return SentimentLexicon(entries)


def score_sentence(tokens: list[str], lexicon: SentimentLexicon) -> SentimentScores:
    """Score a tokenized sentence as (neg, neu, pos) proportions.

    Empty token lists score as fully neutral (0, 1, 0); otherwise the
    three components are nonnegative and sum to 1.
    """
    if not tokens:
        return SentimentScores(0.0, 1.0, 0.0)
    positive = 0.0
    negative = 0.0
    neutral = 0
    for token in tokens:
        valence = lexicon.valence(token)
        if valence is None or valence == 0.0:
            neutral += 1
        elif valence > 0.0:
            positive += valence
        else:
            negative += -valence
    total = positive + negative + neutral
    return SentimentScores(negative / total, neutral / total, positive / total)
