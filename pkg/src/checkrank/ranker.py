"""Gradient-boosted regression trees for pointwise check-worthiness scoring.

Training is stagewise least squares: each stage fits one small regression
tree to the current residuals and adds it, scaled by the learning rate,
to the running prediction. Split search is exhaustive over every feature
and every midpoint between consecutive distinct sorted values, so for a
fixed dataset and configuration the fitted model is fully deterministic:
equal-gain candidates resolve to the lowest feature index, then the
lowest threshold, and when several leaves could be expanded the earliest
created one wins.

After scoring, a ranked list can be post-processed by demotion rules:
sentences matching a rule are pushed strictly below every unmatched
sentence, grouped by rule priority and ordered by line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import Debate, RunEntry, SentenceRecord
from .errors import ConfigError, ContractError
from .textproc import BigramSet, bigram_match_counts

DEFAULT_TREES = 50
DEFAULT_LEAVES = 2
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_MIN_LEAF = 1

RULE_EPSILON = 1e-6

# Training MSE must not increase across stages; tiny float slack only.
_MSE_SLACK = 1e-9


@dataclass
class RegressionTree:
    """Binary regression tree stored as parallel node arrays.

    ``feature[i] == -1`` marks a leaf whose output is ``value[i]``; inner
    nodes send ``x[feature] <= threshold`` left, else right. Node 0 is
    the root.
    """

    feature: list[int] = field(default_factory=lambda: [-1])
    threshold: list[float] = field(default_factory=lambda: [0.0])
    left: list[int] = field(default_factory=lambda: [-1])
    right: list[int] = field(default_factory=lambda: [-1])
    value: list[float] = field(default_factory=lambda: [0.0])

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f == -1)

    def predict_one(self, x: Sequence[float]) -> float:
        node = 0
        while self.feature[node] != -1:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return self.value[node]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=np.float64)
        for i, row in enumerate(X):
            out[i] = self.predict_one(row)
        return out


def _best_split(X: np.ndarray, residuals: np.ndarray, rows: np.ndarray,
                min_leaf: int) -> Optional[tuple[float, int, float]]:
    """Best (gain, feature, threshold) for one node, or None.

    Gain is the SSE reduction of replacing the node mean with per-side
    means. Features are scanned in ascending index order and thresholds
    in ascending value order, so the first strict improvement implements
    the lowest-feature-then-lowest-threshold tie-break.
    """
    r = residuals[rows]
    n = len(r)
    if n < 2 * min_leaf:
        return None
    total = r.sum()
    base = total * total / n
    best: Optional[tuple[float, int, float]] = None
    for j in range(X.shape[1]):
        v = X[rows, j]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sr = r[order]
        prefix = np.cumsum(sr)
        counts = np.arange(1, n, dtype=np.float64)
        left_sum = prefix[:-1]
        right_sum = total - left_sum
        gains = (left_sum * left_sum / counts
                 + right_sum * right_sum / (n - counts) - base)
        valid = sv[:-1] < sv[1:]
        if min_leaf > 1:
            valid &= (counts >= min_leaf) & ((n - counts) >= min_leaf)
        if not valid.any():
            continue
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain <= 0.0:
            continue
        if best is None or gain > best[0]:
            a, b = float(sv[pos]), float(sv[pos + 1])
            threshold = (a + b) / 2.0
            if threshold == b:
                # Adjacent floats can round the midpoint up to b; fall
                # back to a so "x <= threshold" keeps the partition.
                threshold = a
            best = (gain, j, threshold)
    return best


def fit_tree(X: np.ndarray, residuals: np.ndarray, n_leaves: int,
             min_leaf: int) -> RegressionTree:
    """Grow one SSE-minimizing tree with at most ``n_leaves`` leaves."""
    tree = RegressionTree()
    all_rows = np.arange(len(X))
    tree.value[0] = float(residuals.mean()) if len(X) else 0.0

    # Leaves eligible for splitting, in creation order: (node, rows, split).
    open_leaves: list[tuple[int, np.ndarray, Optional[tuple]]] = [
        (0, all_rows, _best_split(X, residuals, all_rows, min_leaf))]
    leaves = 1
    while leaves < n_leaves:
        pick = -1
        pick_gain = 0.0
        for i, (_, _, split) in enumerate(open_leaves):
            if split is not None and split[0] > pick_gain:
                pick = i
                pick_gain = split[0]
        if pick < 0:
            break
        node, rows, split = open_leaves.pop(pick)
        assert split is not None
        _, feature_idx, threshold = split
        go_left = X[rows, feature_idx] <= threshold
        left_rows = rows[go_left]
        right_rows = rows[~go_left]

        left_node = len(tree.feature)
        right_node = left_node + 1
        for child_rows in (left_rows, right_rows):
            tree.feature.append(-1)
            tree.threshold.append(0.0)
            tree.left.append(-1)
            tree.right.append(-1)
            tree.value.append(float(residuals[child_rows].mean()))
        tree.feature[node] = feature_idx
        tree.threshold[node] = threshold
        tree.left[node] = left_node
        tree.right[node] = right_node
        open_leaves.append(
            (left_node, left_rows, _best_split(X, residuals, left_rows, min_leaf)))
        open_leaves.append(
            (right_node, right_rows, _best_split(X, residuals, right_rows, min_leaf)))
        leaves += 1
    return tree


class GbrtRanker(BaseEstimator):
    """Boosted regression-tree scorer with a deterministic fit.

    Parameters follow the usual estimator conventions; fitted state lands
    in underscore attributes (``trees_``, ``base_score_``, ``mse_path_``).
    ``random_state`` is accepted for pipeline-config compatibility but the
    algorithm itself has no random choices.
    """

    def __init__(self, n_trees: int = DEFAULT_TREES,
                 n_leaves: int = DEFAULT_LEAVES,
                 learning_rate: float = DEFAULT_LEARNING_RATE,
                 min_leaf: int = DEFAULT_MIN_LEAF,
                 random_state: int = 0):
        self.n_trees = n_trees
        self.n_leaves = n_leaves
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.random_state = random_state

    def _check_config(self) -> None:
        if self.n_trees < 0:
            raise ConfigError(f"n_trees must be >= 0, got {self.n_trees}")
        if self.n_leaves < 2:
            raise ConfigError(f"n_leaves must be >= 2, got {self.n_leaves}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(
                f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")

    def fit(self, X, y, feature_names: Optional[Sequence[str]] = None):
        """Fit on a feature matrix and real-valued (usually 0/1) targets."""
        self._check_config()
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2:
            raise ContractError(f"X must be 2-dimensional, got {X.ndim}")
        if len(X) != len(y):
            raise ContractError(
                f"{len(X)} feature rows but {len(y)} labels")
        if len(X) < 2:
            raise ContractError("need at least 2 training rows")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ContractError("features and labels must be finite")

        if feature_names is None:
            feature_names = [f"f{j}" for j in range(X.shape[1])]
        if len(feature_names) != X.shape[1]:
            raise ContractError(
                f"{len(feature_names)} feature names for "
                f"{X.shape[1]} columns")

        self.feature_names_ = list(feature_names)
        self.n_features_in_ = X.shape[1]
        self.base_score_ = float(y.mean())
        self.trees_ = []
        self.mse_path_ = []

        current = np.full(len(y), self.base_score_)
        prev_mse = float(np.mean((y - current) ** 2))
        for _ in range(self.n_trees):
            residuals = y - current
            tree = fit_tree(X, residuals, self.n_leaves, self.min_leaf)
            self.trees_.append(tree)
            current = current + self.learning_rate * tree.predict(X)
            mse = float(np.mean((y - current) ** 2))
            if mse > prev_mse + _MSE_SLACK * max(1.0, prev_mse):
                raise AssertionError(
                    f"training MSE increased: {prev_mse} -> {mse}")
            self.mse_path_.append(mse)
            prev_mse = mse
        self.train_mse_ = prev_mse
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "trees_"):
            raise ContractError("model is not fitted")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in_:
            raise ContractError(
                f"feature vector has {X.shape[1]} slots but the model "
                f"manifest has {self.n_features_in_}")
        scores = np.full(len(X), self.base_score_)
        for tree in self.trees_:
            scores = scores + self.learning_rate * tree.predict(X)
        return scores[0] if single else scores


@dataclass(frozen=True)
class RerankRule:
    """Named, pure predicate flagging sentences unlikely to be claims."""

    name: str
    predicate: Callable[[SentenceRecord, list[str]], bool]

    def matches(self, record: SentenceRecord, tokens: list[str]) -> bool:
        return bool(self.predicate(record, tokens))


def min_token_count_rule(minimum: int = 3) -> RerankRule:
    """Demote sentences shorter than ``minimum`` tokens."""
    return RerankRule(
        name=f"fewer_than_{minimum}_tokens",
        predicate=lambda record, tokens: len(tokens) < minimum)


def no_signal_rule(topic_words: Sequence[str],
                   bigrams: BigramSet) -> RerankRule:
    """Demote sentences with no digit, no topic-vocab word, and no
    selected-bigram hit. Closes over trained extractor state."""
    topic_set = set(topic_words)

    def predicate(record: SentenceRecord, tokens: list[str]) -> bool:
        if any(any(c.isdigit() for c in t) for t in tokens):
            return False
        if any(t in topic_set for t in tokens):
            return False
        cw, ncw = bigram_match_counts(tokens, bigrams)
        return cw == 0 and ncw == 0

    return RerankRule(name="no_numeric_topic_or_bigram_signal",
                      predicate=predicate)


def apply_rerank_rules(
        debate: Debate,
        scores: Sequence[float],
        rules: Sequence[RerankRule],
        tokens_per_record: Sequence[list[str]]) -> list[RunEntry]:
    """Order a scored debate, demoting every rule-matched sentence.

    A matched sentence's score becomes ``min(all natural scores) - 1 -
    rule_index * epsilon``, where ``rule_index`` is the first matching
    rule's position. That places matches strictly after every unmatched
    sentence, earlier rules first; remaining ties order by line number.
    """
    if len(scores) != len(debate.records):
        raise ContractError(
            f"{len(scores)} scores for {len(debate.records)} records")
    entries: list[RunEntry] = []
    floor = min(scores) if scores else 0.0
    for record, score, tokens in zip(debate.records, scores, tokens_per_record):
        matched = None
        for index, rule in enumerate(rules):
            if rule.matches(record, tokens):
                matched = index
                break
        final = score if matched is None else floor - 1.0 - matched * RULE_EPSILON
        entries.append(RunEntry(line_number=record.line_number, score=final))
    entries.sort(key=lambda e: (-e.score, e.line_number))
    return entries
