"""Debate transcripts, labels, and ranking runs.

File formats
------------
Debate TSV (UTF-8, no header), one sentence per line:

    line_number \t speaker \t text \t label      (labeled, 4 columns)
    line_number \t speaker \t text               (unlabeled, 3 columns)

``line_number`` starts at 1 and increases strictly; ``label`` is 0 or 1.
Tabs inside sentence text are not supported. The debate id is the file
stem, since a corpus ships one file per event.

Run file, one row per sentence, sorted by descending score:

    line_number \t score

Scores are printed with six decimal digits so run files diff cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ContractError, CoverageError, ParseError

SCORE_FORMAT = "{:.6f}"


@dataclass(frozen=True)
class SentenceRecord:
    """One transcript line: where it was said, by whom, and what."""

    debate_id: str
    line_number: int
    speaker: str
    text: str
    label: Optional[int] = None

    def __post_init__(self) -> None:
        if self.line_number < 1:
            raise ContractError(
                f"line_number must be >= 1, got {self.line_number}")
        if self.label is not None:
            if self.label not in (0, 1):
                raise ContractError(f"label must be 0 or 1, got {self.label!r}")
            if not self.text.strip():
                raise ContractError(
                    f"labeled record {self.debate_id}:{self.line_number} "
                    "has empty text")


@dataclass(frozen=True)
class Debate:
    """An ordered list of sentence records sharing one debate id."""

    debate_id: str
    records: tuple[SentenceRecord, ...]

    def line_numbers(self) -> list[int]:
        return [r.line_number for r in self.records]

    def labels(self) -> list[Optional[int]]:
        return [r.label for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class RunEntry:
    """A (line number, score) pair from a ranking run."""

    line_number: int
    score: float

    def __post_init__(self) -> None:
        if self.line_number < 1:
            raise ContractError(
                f"line_number must be >= 1, got {self.line_number}")
        if self.score != self.score or self.score in (float("inf"), float("-inf")):
            raise ContractError(
                f"score for line {self.line_number} is not finite")


def parse_debate_tsv(path: str | Path, labeled: bool) -> Debate:
    """Parse one debate file into a :class:`Debate`.

    Labeled files carry 4 tab-separated columns, unlabeled files 3.
    Any malformed line (wrong column count, non-integer line number,
    label outside {0, 1}, empty text in a labeled file, line numbers
    not strictly increasing) raises :class:`ParseError` naming the file
    and line.
    """
    path = Path(path)
    expected_fields = 4 if labeled else 3
    records: list[SentenceRecord] = []
    prev_line_number = 0
    with path.open("r", encoding="utf-8", newline="") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.rstrip("\n").rstrip("\r")
            if raw == "":
                continue
            fields = raw.split("\t")
            if len(fields) != expected_fields:
                raise ParseError(
                    f"{path}:{lineno}: expected {expected_fields} "
                    f"tab-separated fields, got {len(fields)}")
            try:
                line_number = int(fields[0])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: line number {fields[0]!r} "
                    "is not an integer") from None
            if line_number < 1:
                raise ParseError(
                    f"{path}:{lineno}: line number must be >= 1, "
                    f"got {line_number}")
            if line_number <= prev_line_number:
                raise ParseError(
                    f"{path}:{lineno}: line numbers must increase strictly "
                    f"({line_number} after {prev_line_number})")
            label: Optional[int] = None
            if labeled:
                if fields[3] not in ("0", "1"):
                    raise ParseError(
                        f"{path}:{lineno}: label must be 0 or 1, "
                        f"got {fields[3]!r}")
                label = int(fields[3])
                if not fields[2].strip():
                    raise ParseError(
                        f"{path}:{lineno}: labeled sentence has empty text")
            records.append(SentenceRecord(
                debate_id=path.stem,
                line_number=line_number,
                speaker=fields[1],
                text=fields[2],
                label=label,
            ))
            prev_line_number = line_number
    return Debate(debate_id=path.stem, records=tuple(records))


def write_debate_tsv(debate: Debate, path: str | Path) -> None:
    """Write a debate back to disk, labeled iff its records carry labels.

    Tabs and newlines inside speaker or text would make the format
    ambiguous, so they are rejected.
    """
    path = Path(path)
    rows = []
    for r in debate.records:
        for value in (r.speaker, r.text):
            if "\t" in value or "\n" in value or "\r" in value:
                raise ContractError(
                    f"{debate.debate_id}:{r.line_number}: tabs/newlines in "
                    "speaker or text are not representable in the TSV format")
        cols = [str(r.line_number), r.speaker, r.text]
        if r.label is not None:
            cols.append(str(r.label))
        rows.append("\t".join(cols))
    path.write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")


def write_run(debate: Debate, entries: Sequence[RunEntry], path: str | Path) -> None:
    """Write a run file for ``debate``.

    Entries must cover the debate's line numbers exactly once each;
    anything missing or extra raises :class:`CoverageError`. Rows are
    sorted by descending score, ties by ascending line number.
    """
    debate_lines = set(debate.line_numbers())
    entry_lines = [e.line_number for e in entries]
    if len(set(entry_lines)) != len(entry_lines):
        raise CoverageError(
            f"run for {debate.debate_id!r} repeats line numbers")
    missing = sorted(debate_lines - set(entry_lines))
    extra = sorted(set(entry_lines) - debate_lines)
    if missing or extra:
        raise CoverageError(
            f"run for {debate.debate_id!r} does not cover the debate: "
            f"missing {missing}, extra {extra}")
    ordered = sorted(entries, key=lambda e: (-e.score, e.line_number))
    lines = [f"{e.line_number}\t{SCORE_FORMAT.format(e.score)}" for e in ordered]
    Path(path).write_text(
        "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_run(path: str | Path) -> list[RunEntry]:
    """Read a run file back into entries, preserving file order."""
    path = Path(path)
    entries: list[RunEntry] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            fields = raw.split("\t")
            if len(fields) != 2:
                raise ParseError(
                    f"{path}:{lineno}: expected 2 tab-separated fields, "
                    f"got {len(fields)}")
            try:
                entries.append(RunEntry(int(fields[0]), float(fields[1])))
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: malformed run row {raw!r}") from None
    return entries


@dataclass
class ValidationReport:
    """Report-only corpus health summary; never raises."""

    debates: int = 0
    sentences: int = 0
    positives: int = 0
    negatives: int = 0
    unlabeled: int = 0
    duplicate_lines: list[tuple[str, int]] = field(default_factory=list)
    empty_texts: list[tuple[str, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.duplicate_lines and not self.empty_texts

    def format(self) -> str:
        lines = [
            f"debates:    {self.debates}",
            f"sentences:  {self.sentences}",
            f"positives:  {self.positives}",
            f"negatives:  {self.negatives}",
            f"unlabeled:  {self.unlabeled}",
        ]
        for debate_id, line in self.duplicate_lines:
            lines.append(f"duplicate line number: {debate_id}:{line}")
        for debate_id, line in self.empty_texts:
            lines.append(f"empty text: {debate_id}:{line}")
        lines.append("status: " + ("ok" if self.ok else "problems found"))
        return "\n".join(lines)


def validate_corpus(debates: Iterable[Debate]) -> ValidationReport:
    """Scan a corpus and summarize label distribution and defects."""
    report = ValidationReport()
    for debate in debates:
        report.debates += 1
        seen: set[int] = set()
        for record in debate.records:
            report.sentences += 1
            if record.line_number in seen:
                report.duplicate_lines.append(
                    (debate.debate_id, record.line_number))
            seen.add(record.line_number)
            if not record.text.strip():
                report.empty_texts.append(
                    (debate.debate_id, record.line_number))
            if record.label == 1:
                report.positives += 1
            elif record.label == 0:
                report.negatives += 1
            else:
                report.unlabeled += 1
    return report


def load_debates_dir(directory: str | Path, labeled: bool) -> list[Debate]:
    """Parse every ``*.tsv`` file in ``directory``, sorted by filename."""
    directory = Path(directory)
    return [parse_debate_tsv(p, labeled=labeled)
            for p in sorted(directory.glob("*.tsv"))]
