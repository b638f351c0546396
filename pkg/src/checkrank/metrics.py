"""Ranking metrics over per-debate runs: MAP, MRR, R-Precision, and P@N.

Each debate is one query. A ranking is the debate's line numbers in
system order; judgments are the set of line numbers labeled check-worthy.
All metrics are functions of the relevance bit-pattern alone and live in
[0, 1]. Queries with no relevant line get 0 for every metric and are
flagged rather than dropped, so means stay defined on arbitrary corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ContractError

PRECISION_CUTOFFS = (1, 3, 5, 10, 20, 50)

METRIC_NAMES = ("MAP", "MRR", "R-P") + tuple(
    f"P@{n}" for n in PRECISION_CUTOFFS)

# Column headers for the standard comparison-table layout.
TABLE_COLUMNS = ("MAP", "RR", "R-P") + tuple(
    f"P@{n}" for n in PRECISION_CUTOFFS)


@dataclass(frozen=True)
class QueryJudgments:
    """Gold data for one query: its id and the relevant line numbers."""

    query_id: str
    relevant: frozenset[int]


def _check_ranking(ranking: Sequence[int]) -> None:
    if len(set(ranking)) != len(ranking):
        raise ContractError("ranking contains duplicate line numbers")


def average_precision(ranking: Sequence[int], judgments: QueryJudgments) -> float:
    """Mean of precision values at each relevant rank; 0 when R = 0."""
    _check_ranking(ranking)
    relevant = judgments.relevant
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for rank, line in enumerate(ranking, start=1):
        if line in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def reciprocal_rank(ranking: Sequence[int], judgments: QueryJudgments) -> float:
    """Inverse rank of the first relevant line; 0 if none is retrieved."""
    _check_ranking(ranking)
    for rank, line in enumerate(ranking, start=1):
        if line in judgments.relevant:
            return 1.0 / rank
    return 0.0


def r_precision(ranking: Sequence[int], judgments: QueryJudgments) -> float:
    """Precision within the top R ranks, R being the relevant count."""
    _check_ranking(ranking)
    r = len(judgments.relevant)
    if r == 0:
        return 0.0
    hits = sum(1 for line in ranking[:r] if line in judgments.relevant)
    return hits / r


def precision_at_n(ranking: Sequence[int], judgments: QueryJudgments,
                   n: int) -> float:
    """Fraction of the top ``n`` ranks that are relevant.

    The denominator stays ``n`` even when the ranking is shorter; missing
    tail positions count as irrelevant.
    """
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    _check_ranking(ranking)
    hits = sum(1 for line in ranking[:n] if line in judgments.relevant)
    return hits / n


@dataclass
class MetricsReport:
    """Mean metric values over a set of queries, plus no-relevant flags."""

    values: dict[str, float]
    query_count: int = 0
    no_relevant_queries: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def row(self) -> list[float]:
        return [self.values[name] for name in METRIC_NAMES]

    def format_row(self, label: str = "", width: int = 8) -> str:
        cells = [f"{v:.4f}".rjust(width) for v in self.row()]
        return (label.ljust(28) if label else "") + "".join(cells)

    @staticmethod
    def header(width: int = 8) -> str:
        return " " * 28 + "".join(c.rjust(width) for c in TABLE_COLUMNS)

    def to_dict(self) -> dict:
        return {
            "metrics": dict(self.values),
            "queries": self.query_count,
            "no_relevant_queries": list(self.no_relevant_queries),
        }


def evaluate_query(ranking: Sequence[int],
                   judgments: QueryJudgments) -> dict[str, float]:
    """All per-query metrics for one ranking."""
    values = {
        "MAP": average_precision(ranking, judgments),
        "MRR": reciprocal_rank(ranking, judgments),
        "R-P": r_precision(ranking, judgments),
    }
    for n in PRECISION_CUTOFFS:
        values[f"P@{n}"] = precision_at_n(ranking, judgments, n)
    return values


def evaluate_run(runs: Mapping[str, Sequence[int]],
                 judgments: Mapping[str, QueryJudgments]) -> MetricsReport:
    """Mean metrics over matching query sets.

    ``runs`` maps query id to the ranked line numbers, ``judgments`` maps
    query id to gold data. The two key sets must be identical; a mismatch
    raises :class:`ContractError` listing the difference.
    """
    run_ids = set(runs)
    gold_ids = set(judgments)
    if run_ids != gold_ids:
        missing = sorted(gold_ids - run_ids)
        extra = sorted(run_ids - gold_ids)
        raise ContractError(
            f"query sets differ: missing runs for {missing}, "
            f"unexpected runs for {extra}")
    if not runs:
        raise ContractError("cannot evaluate an empty run set")
    sums = {name: 0.0 for name in METRIC_NAMES}
    flagged: list[str] = []
    for query_id in sorted(runs):
        per_query = evaluate_query(runs[query_id], judgments[query_id])
        if not judgments[query_id].relevant:
            flagged.append(query_id)
        for name in METRIC_NAMES:
            sums[name] += per_query[name]
    count = len(runs)
    return MetricsReport(
        values={name: sums[name] / count for name in METRIC_NAMES},
        query_count=count,
        no_relevant_queries=flagged,
    )


def truncate_percent(value: float, digits: int = 2) -> float:
    """Truncate a percentage toward zero at ``digits`` decimals.

    Comparison tables conventionally print improvement percentages cut,
    not rounded, so 57.918% displays as 57.91. Rendering at well beyond
    display precision first keeps one-ulp representation noise (20.24
    stored as 20.2399...98) from flipping the last kept digit.
    """
    rendered = f"{value:.{digits + 8}f}"
    point = rendered.index(".")
    return float(rendered[:point + 1 + digits])


def percent_delta(baseline: float, value: float) -> float:
    """Relative change from ``baseline`` to ``value`` in percent."""
    if baseline == 0.0:
        return math.inf if value > 0 else (-math.inf if value < 0 else 0.0)
    return (value - baseline) / baseline * 100.0


@dataclass
class AblationReport:
    """Named metric rows plus percentage deltas against a baseline row."""

    rows: list[tuple[str, MetricsReport]]
    baseline: str

    def __post_init__(self) -> None:
        if not self.rows:
            raise ContractError("ablation report needs at least one row")
        names = [name for name, _ in self.rows]
        if self.baseline not in names:
            raise ContractError(
                f"baseline {self.baseline!r} is not among rows {names}")

    def _baseline_report(self) -> MetricsReport:
        for name, report in self.rows:
            if name == self.baseline:
                return report
        raise AssertionError("unreachable")

    def delta_percent(self, row_name: str, metric: str) -> float:
        """Exact (untruncated) percentage delta for one cell."""
        base = self._baseline_report()[metric]
        for name, report in self.rows:
            if name == row_name:
                return percent_delta(base, report[metric])
        raise ContractError(f"unknown row {row_name!r}")

    def delta_display(self, row_name: str, metric: str) -> str:
        """Delta formatted the way comparison tables print it."""
        value = self.delta_percent(row_name, metric)
        if math.isinf(value):
            return "n/a"
        truncated = truncate_percent(value)
        return f"{'+' if truncated >= 0 else ''}{truncated:.2f}%"

    def format(self) -> str:
        lines = [MetricsReport.header()]
        for name, report in self.rows:
            lines.append(report.format_row(label=name))
        lines.append("")
        lines.append(f"deltas vs {self.baseline}:")
        width = 9
        lines.append(" " * 28 + "".join(c.rjust(width) for c in TABLE_COLUMNS))
        for name, _ in self.rows:
            if name == self.baseline:
                continue
            cells = [self.delta_display(name, metric).rjust(width)
                     for metric in METRIC_NAMES]
            lines.append(name.ljust(28) + "".join(cells))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "rows": {name: report.to_dict() for name, report in self.rows},
            "deltas_percent": {
                name: {metric: self.delta_percent(name, metric)
                       for metric in METRIC_NAMES}
                for name, _ in self.rows if name != self.baseline
            },
        }


def ablation_report(rows: Iterable[tuple[str, MetricsReport]],
                    baseline: str | None = None) -> AblationReport:
    """Build an :class:`AblationReport`; baseline defaults to the first row."""
    rows = list(rows)
    if not rows:
        raise ContractError("ablation report needs at least one row")
    return AblationReport(rows=rows, baseline=baseline or rows[0][0])


def _reference_report(values: Sequence[float]) -> MetricsReport:
    return MetricsReport(values=dict(zip(METRIC_NAMES, values)))


# Reference comparison rows used by documentation and the delta tests.
# Metric order: MAP, MRR, R-P, P@1, P@3, P@5, P@10, P@20, P@50.
REFERENCE_ABLATION_ROWS: dict[str, MetricsReport] = {
    "baseline": _reference_report(
        (.0884, .2028, .1150, .0000, .0952, .1429, .1286, .1357, .0829)),
    "sentiment_only": _reference_report(
        (.0832, .3017, .0873, .1429, .1905, .1429, .1286, .1000, .0800)),
    "sentiment+baseline": _reference_report(
        (.0885, .1992, .1218, .0000, .1429, .1143, .1286, .1500, .0829)),
    "embeddings_only": _reference_report(
        (.1243, .2207, .1522, .1429, .0952, .0857, .1571, .1643, .1200)),
    "embeddings+baseline": _reference_report(
        (.1287, .2318, .1577, .1429, .1429, .1714, .1429, .1786, .1171)),
    "topics_only": _reference_report(
        (.1151, .3487, .0979, .2857, .1905, .1714, .1429, .1071, .0800)),
    "topics+baseline": _reference_report(
        (.1063, .1930, .1327, .0000, .0952, .2000, .1714, .1429, .0886)),
    "combined": _reference_report(
        (.1396, .2780, .1348, .1429, .1905, .1714, .1571, .1643, .1171)),
}
