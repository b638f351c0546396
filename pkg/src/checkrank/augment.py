"""Corpus expansion by similar-word substitution.

Nouns and adjectives are swapped for their nearest neighbor in a word
vector store when the cosine similarity clears a threshold; everything
else stays put, so augmented sentences keep their token count and label.

Part-of-speech tags come from a sidecar file when available (one row per
sentence: ``debate_id \t line_number \t space-joined tags``), with a tiny
built-in lexicon-and-suffix tagger as the standalone fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .corpus import Debate, SentenceRecord
from .embeddings import VectorStore, nearest_word
from .errors import ContractError, MissingAnnotationError, ParseError
from .textproc import tokenize

NOUN = "NOUN"
ADJ = "ADJ"
OTHER = "OTHER"
VALID_TAGS = frozenset({NOUN, ADJ, OTHER})

DEFAULT_MIN_SIMILARITY = 0.5

_FALLBACK_NOUNS = frozenset({
    "border", "budget", "business", "children", "city", "country", "crime",
    "debt", "deficit", "dollar", "economy", "education", "energy", "family",
    "government", "health", "job", "jobs", "law", "market", "money", "nation",
    "people", "plan", "police", "president", "school", "state", "tax",
    "taxes", "trade", "wall", "war", "worker", "workers", "world", "year",
    "years",
})

_FALLBACK_ADJECTIVES = frozenset({
    "american", "bad", "big", "economic", "federal", "foreign", "good",
    "great", "high", "huge", "illegal", "low", "national", "new", "poor",
    "public", "rich", "small", "strong", "weak",
})

_NOUN_SUFFIXES = ("tion", "ment", "ness", "ship", "ism", "ies", "es", "ers")
_ADJ_SUFFIXES = ("ful", "ous", "ive", "able", "ible", "ical", "less")


@dataclass(frozen=True)
class PosTaggedSentence:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise ContractError(
                f"{len(self.tags)} tags for {len(self.tokens)} tokens")
        bad = set(self.tags) - VALID_TAGS
        if bad:
            raise ContractError(f"invalid tags {sorted(bad)}")


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str], debate_id: Optional[str] = None,
            line_number: Optional[int] = None) -> PosTaggedSentence: ...


class FallbackTagger:
    """Lexicon plus suffix heuristics; exists so tests run standalone."""

    def tag(self, tokens: Sequence[str], debate_id: Optional[str] = None,
            line_number: Optional[int] = None) -> PosTaggedSentence:
        tags = []
        for token in tokens:
            if token in _FALLBACK_NOUNS:
                tags.append(NOUN)
            elif token in _FALLBACK_ADJECTIVES:
                tags.append(ADJ)
            elif token.endswith(_NOUN_SUFFIXES):
                tags.append(NOUN)
            elif token.endswith(_ADJ_SUFFIXES):
                tags.append(ADJ)
            else:
                tags.append(OTHER)
        return PosTaggedSentence(tokens=tuple(tokens), tags=tuple(tags))


class SidecarTagger:
    """Tags served from a sidecar TSV keyed by (debate id, line number)."""

    def __init__(self, rows: dict[tuple[str, int], tuple[str, ...]]):
        self._rows = rows

    @classmethod
    def load(cls, path: str | Path) -> "SidecarTagger":
        path = Path(path)
        rows: dict[tuple[str, int], tuple[str, ...]] = {}
        with path.open("r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                raw = raw.rstrip("\n")
                if not raw.strip():
                    continue
                fields = raw.split("\t")
                if len(fields) != 3:
                    raise ParseError(
                        f"{path}:{lineno}: expected 3 tab-separated fields, "
                        f"got {len(fields)}")
                try:
                    line_number = int(fields[1])
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: line number {fields[1]!r} "
                        "is not an integer") from None
                tags = tuple(fields[2].split())
                bad = set(tags) - VALID_TAGS
                if bad:
                    raise ParseError(
                        f"{path}:{lineno}: invalid tags {sorted(bad)}")
                rows[(fields[0], line_number)] = tags
        return cls(rows)

    def tag(self, tokens: Sequence[str], debate_id: Optional[str] = None,
            line_number: Optional[int] = None) -> PosTaggedSentence:
        key = (debate_id, line_number)
        if debate_id is None or line_number is None or key not in self._rows:
            raise MissingAnnotationError(
                f"sidecar has no tags for {debate_id}:{line_number}")
        tags = self._rows[key]
        if len(tags) != len(tokens):
            raise MissingAnnotationError(
                f"sidecar row for {debate_id}:{line_number} has "
                f"{len(tags)} tags for {len(tokens)} tokens")
        return PosTaggedSentence(tokens=tuple(tokens), tags=tags)


def tag_tokens(tokens: Sequence[str], tagger: Tagger,
               debate_id: Optional[str] = None,
               line_number: Optional[int] = None) -> PosTaggedSentence:
    """Tag a tokenized sentence through whichever source is configured."""
    return tagger.tag(tokens, debate_id=debate_id, line_number=line_number)


def augment_sentence(sentence: PosTaggedSentence, store: VectorStore,
                     min_sim: float = DEFAULT_MIN_SIMILARITY
                     ) -> Optional[list[str]]:
    """Replace NOUN/ADJ tokens with their nearest stored neighbor.

    A token is replaced only when it is present in the store, a distinct
    neighbor exists, and the similarity reaches ``min_sim``. Returns the
    new token list, or None when nothing was replaced.
    """
    replaced = False
    out = []
    for token, tag in zip(sentence.tokens, sentence.tags):
        new_token = token
        if tag in (NOUN, ADJ) and token in store and len(store) >= 2:
            neighbor, similarity = nearest_word(token, store, exclude_self=True)
            if similarity >= min_sim:
                new_token = neighbor
                replaced = True
        out.append(new_token)
    return out if replaced else None


@dataclass
class AugmentedCorpus:
    """New records plus where each one came from."""

    records: list[SentenceRecord] = field(default_factory=list)
    provenance: dict[tuple[str, int], int] = field(default_factory=dict)


def augment_corpus(debates: Sequence[Debate], store: VectorStore,
                   tagger: Tagger,
                   min_sim: float = DEFAULT_MIN_SIMILARITY,
                   max_copies: int = 1) -> AugmentedCorpus:
    """Generate augmented records for a labeled corpus.

    Substitution is deterministic, so each source sentence yields at most
    one distinct variant; ``max_copies`` caps whether it is emitted at
    all. New records inherit the source label and speaker and take line
    numbers after the debate's existing range.
    """
    if max_copies < 0:
        raise ContractError(f"max_copies must be >= 0, got {max_copies}")
    result = AugmentedCorpus()
    if max_copies == 0:
        return result
    for debate in debates:
        next_line = max(debate.line_numbers(), default=0) + 1
        for record in debate.records:
            if record.label is None:
                raise ContractError(
                    f"augmentation needs labels; "
                    f"{debate.debate_id}:{record.line_number} has none")
            tokens = tokenize(record.text)
            if not tokens:
                continue
            tagged = tag_tokens(tokens, tagger, debate_id=debate.debate_id,
                                line_number=record.line_number)
            new_tokens = augment_sentence(tagged, store, min_sim=min_sim)
            if new_tokens is None:
                continue
            new_record = SentenceRecord(
                debate_id=record.debate_id,
                line_number=next_line,
                speaker=record.speaker,
                text=" ".join(new_tokens),
                label=record.label)
            result.records.append(new_record)
            result.provenance[(debate.debate_id, next_line)] = record.line_number
            next_line += 1
    return result
