"""Acceptance suite: one test per exit criterion, tolerances pinned.

Each test prints a PASS/FAIL line through the conftest hook. The
criteria are property-based plus synthetic end-to-end runs; nothing here
depends on external data or services beyond the local stub.
"""

from __future__ import annotations

import json
import random
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from checkrank import cli
from checkrank.bundle import load_bundle, save_bundle
from checkrank.embeddings import (HashEmbedder, ServiceBackend, StoreBackend,
                                  build_text_store, embed_batch)
from checkrank.errors import TransportError
from checkrank.metrics import (PRECISION_CUTOFFS, QueryJudgments,
                               REFERENCE_ABLATION_ROWS, ablation_report,
                               average_precision, evaluate_run,
                               precision_at_n, r_precision, reciprocal_rank)
from checkrank.pipeline import (BigramFeatures, CheckWorthinessRanker,
                                EmbeddingFeatures, FeatureAssembler,
                                SentimentFeatures, TopicFeatures)
from checkrank.ranker import GbrtRanker
from checkrank.sentiment import SentimentLexicon, score_sentence
from checkrank.topics import build_dictionary, fit_lda, to_bow, top_words

from conftest import generate_synthetic_corpus
from oracles import (brute_average_precision, brute_precision_at_n,
                     brute_r_precision, brute_reciprocal_rank)


def test_metric_oracle_equivalence():
    """1000 random instances of <= 50 items match the brute-force scorer
    to 1e-12 for AP, RR, R-P, and every P@N cutoff, in under 5 s."""
    started = time.perf_counter()
    rng = random.Random(20190715)
    for _ in range(1000):
        n = rng.randint(1, 50)
        ranking = rng.sample(range(1, 500), n)
        relevant = {line for line in ranking if rng.random() < 0.3}
        judgments = QueryJudgments("q", frozenset(relevant))
        assert abs(average_precision(ranking, judgments)
                   - brute_average_precision(ranking, relevant)) <= 1e-12
        assert abs(reciprocal_rank(ranking, judgments)
                   - brute_reciprocal_rank(ranking, relevant)) <= 1e-12
        assert abs(r_precision(ranking, judgments)
                   - brute_r_precision(ranking, relevant)) <= 1e-12
        for cutoff in PRECISION_CUTOFFS:
            assert abs(precision_at_n(ranking, judgments, cutoff)
                       - brute_precision_at_n(ranking, relevant, cutoff)) \
                <= 1e-12
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"oracle sweep took {elapsed:.2f}s"


def test_metric_endpoints():
    """Perfect ranking scores exactly 1; an all-irrelevant query scores 0
    everywhere and is flagged."""
    ranking = [3, 8, 1, 5, 9]
    perfect = QueryJudgments("q", frozenset({3, 8}))
    assert average_precision(ranking, perfect) == 1.0
    assert reciprocal_rank(ranking, perfect) == 1.0
    assert r_precision(ranking, perfect) == 1.0

    report = evaluate_run({"q": ranking},
                          {"q": QueryJudgments("q", frozenset())})
    assert report.no_relevant_queries == ["q"]
    for name, value in report.values.items():
        assert value == 0.0, name


def test_ablation_arithmetic():
    """The reference comparison rows reproduce the published percentage
    improvements at two decimal places."""
    rows = [("baseline", REFERENCE_ABLATION_ROWS["baseline"]),
            ("embeddings+baseline",
             REFERENCE_ABLATION_ROWS["embeddings+baseline"]),
            ("topics+baseline", REFERENCE_ABLATION_ROWS["topics+baseline"]),
            ("combined", REFERENCE_ABLATION_ROWS["combined"])]
    report = ablation_report(rows, baseline="baseline")
    assert report.delta_display("combined", "MAP") == "+57.91%"
    assert report.delta_display("embeddings+baseline", "MAP") == "+45.58%"
    assert report.delta_display("topics+baseline", "MAP") == "+20.24%"


def test_gbrt_correctness(tmp_path):
    """Constant targets and the 1-D threshold dataset are learned exactly,
    training MSE never increases over 50 stages on 20 seeded datasets, and
    a bundle round-trip predicts bit-identically on a 100-row probe."""
    # (a) constant target
    X = np.array([[0.2, 5.0], [0.9, 1.0], [0.4, 2.0], [0.8, 8.0]])
    constant = GbrtRanker(n_trees=50, n_leaves=2, learning_rate=0.1).fit(
        X, np.ones(4))
    assert np.array_equal(constant.predict(X), np.ones(4))

    # (b) 1-D threshold, one stump at unit learning rate
    X1 = np.array([[-1.0], [-1.0], [1.0], [1.0]])
    y1 = np.array([0.0, 0.0, 1.0, 1.0])
    stump = GbrtRanker(n_trees=1, n_leaves=2, learning_rate=1.0).fit(X1, y1)
    assert np.array_equal(stump.predict(X1), y1)

    # (c) 50-stage monotone MSE on 20 seeded random datasets
    for seed in range(20):
        rng = np.random.default_rng(seed)
        Xr = rng.standard_normal((80, 6))
        yr = (Xr[:, 0] - 0.7 * Xr[:, 2]
              + 0.2 * rng.standard_normal(80) > 0).astype(float)
        model = GbrtRanker(n_trees=50, n_leaves=2, learning_rate=0.1).fit(
            Xr, yr)
        path = model.mse_path_
        assert len(path) == 50
        for before, after in zip(path, path[1:]):
            assert after <= before + 1e-12

    # (d) bundle round-trip, bit-identical on a 100-row probe
    train_dir = tmp_path / "train"
    generate_synthetic_corpus(train_dir, n_debates=2, n_lines=50, seed=9)
    from checkrank.corpus import load_debates_dir
    debates = load_debates_dir(train_dir, labeled=True)
    ranker = CheckWorthinessRanker(
        assembler=FeatureAssembler({
            "sbert": EmbeddingFeatures(backend=HashEmbedder(dim=16)),
            "sf": SentimentFeatures(),
            "tmf": TopicFeatures(n_topics=2, top_n=5, alpha=0.1,
                                 iterations=50, seed=1),
            "bigrams": BigramFeatures(threshold=2),
        }),
        model=GbrtRanker(n_trees=25, n_leaves=2))
    ranker.fit(debates)
    probe = [record for debate in debates for record in debate.records][:100]
    assert len(probe) == 100
    bundle_path = tmp_path / "model.clrkmdl"
    save_bundle(ranker, bundle_path)
    reloaded = load_bundle(bundle_path)
    assert np.array_equal(ranker.predict(probe), reloaded.predict(probe))


def test_lda_properties():
    """K=1 matches smoothed corpus frequencies to 1e-9; two disjoint
    vocabularies separate with purity >= 0.9 for at least 19 of 20 seeds;
    refitting with a fixed seed is bit-identical; all in under 30 s."""
    started = time.perf_counter()

    # K=1 closed form
    rng = random.Random(7)
    vocab = [f"w{i}" for i in range(25)]
    docs = [rng.choices(vocab, k=rng.randint(3, 9)) for _ in range(40)]
    dictionary = build_dictionary(docs)
    bows = [to_bow(doc, dictionary) for doc in docs]
    beta = 0.01
    single = fit_lda(bows, n_topics=1, alpha=0.5, beta=beta, iterations=5,
                     seed=0, dictionary=dictionary)
    counts = Counter(word for doc in docs for word in doc)
    total = sum(counts.values())
    v = len(dictionary)
    for word, word_id in dictionary.id_of.items():
        expected = (counts[word] + beta) / (total + v * beta)
        assert abs(single.phi[0][word_id] - expected) <= 1e-9

    # two disjoint 10-word vocabularies, 200 documents, 20 seeds
    corpus_rng = random.Random(55)
    group_a = [f"alpha{i}" for i in range(10)]
    group_b = [f"beta{i}" for i in range(10)]
    docs2 = []
    for _ in range(100):
        docs2.append(corpus_rng.choices(group_a, k=8))
        docs2.append(corpus_rng.choices(group_b, k=8))
    dictionary2 = build_dictionary(docs2)
    bows2 = [to_bow(doc, dictionary2) for doc in docs2]
    pure_seeds = 0
    for seed in range(20):
        model = fit_lda(bows2, n_topics=2, alpha=0.1, beta=0.01,
                        iterations=60, seed=seed, dictionary=dictionary2)
        purities = []
        for topic in range(2):
            words = [w for w, _ in top_words(model, topic, 10)]
            a = sum(1 for w in words if w.startswith("alpha"))
            purities.append(max(a, len(words) - a) / len(words))
        if min(purities) >= 0.9:
            pure_seeds += 1
    assert pure_seeds >= 19, f"only {pure_seeds}/20 seeds reached purity 0.9"

    # bit-identical refit
    first = fit_lda(bows2, n_topics=2, alpha=0.1, beta=0.01, iterations=30,
                    seed=123, dictionary=dictionary2)
    second = fit_lda(bows2, n_topics=2, alpha=0.1, beta=0.01, iterations=30,
                     seed=123, dictionary=dictionary2)
    assert first.phi == second.phi

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"topic-model sweep took {elapsed:.2f}s"


def test_sentiment_properties():
    """Proportions sum to 1 (within 1e-9) on 10,000 random sentences, and
    negating every valence swaps neg and pos exactly."""
    rng = random.Random(99)
    vocab = [f"w{i}" for i in range(60)]
    lexicon = SentimentLexicon(
        {w: rng.uniform(-4, 4) for w in rng.sample(vocab, 30)})
    flipped = lexicon.negated()
    for _ in range(10_000):
        tokens = rng.choices(vocab, k=rng.randint(1, 20))
        scores = score_sentence(tokens, lexicon)
        assert abs(scores.neg + scores.neu + scores.pos - 1.0) <= 1e-9
        assert scores.neg >= 0.0 and scores.neu >= 0.0 and scores.pos >= 0.0
        mirrored = score_sentence(tokens, flipped)
        assert mirrored.neg == scores.pos
        assert mirrored.pos == scores.neg
        assert mirrored.neu == scores.neu


def run_full_pipeline(corpus_dir: Path, work_dir: Path) -> dict:
    """train + rank + evaluate through the CLI; returns artifact bytes."""
    work_dir.mkdir(parents=True, exist_ok=True)
    bundle = work_dir / "model.clrkmdl"
    runs = work_dir / "runs"
    report = work_dir / "metrics.json"
    args = ["train", "--train-dir", str(corpus_dir), "--out", str(bundle),
            "--features", "sbert,sf,tmf,bigrams",
            "--embedding-backend", "fallback", "--embedding-dim", "64",
            "--seed", "11", "--trees", "50", "--leaves", "2",
            "--topics-k", "5", "--topics-top-n", "5",
            "--topics-iterations", "80", "--bigram-threshold", "3"]
    assert cli.main(args) == 0
    assert cli.main(["rank", "--bundle", str(bundle),
                     "--input-dir", str(corpus_dir), "--out-dir", str(runs),
                     "--labeled"]) == 0
    assert cli.main(["evaluate", "--gold-dir", str(corpus_dir),
                     "--run-dir", str(runs),
                     "--json-out", str(report)]) == 0
    return {
        "bundle": bundle.read_bytes(),
        "runs": {p.name: p.read_bytes() for p in sorted(runs.glob("*.run"))},
        "metrics": json.loads(report.read_text()),
        "metrics_bytes": report.read_bytes(),
    }


def test_end_to_end_synthetic_signal(tmp_path):
    """On a 5x100 synthetic corpus the trained pipeline's MAP is at least
    twice the mean MAP of 100 random permutations, and two full
    train+rank+evaluate invocations are byte-identical, in under 60 s."""
    started = time.perf_counter()
    corpus_dir = tmp_path / "corpus"
    generate_synthetic_corpus(corpus_dir, n_debates=5, n_lines=100, seed=42)

    first = run_full_pipeline(corpus_dir, tmp_path / "run1")
    second = run_full_pipeline(corpus_dir, tmp_path / "run2")
    assert first["bundle"] == second["bundle"]
    assert first["runs"] == second["runs"]
    assert first["metrics_bytes"] == second["metrics_bytes"]

    trained_map = first["metrics"]["metrics"]["MAP"]

    from checkrank.corpus import load_debates_dir
    debates = load_debates_dir(corpus_dir, labeled=True)
    judgments = {
        d.debate_id: QueryJudgments(
            d.debate_id,
            frozenset(r.line_number for r in d.records if r.label == 1))
        for d in debates}
    perm_rng = random.Random(4242)
    permutation_maps = []
    for _ in range(100):
        runs = {}
        for debate in debates:
            lines = debate.line_numbers()
            perm_rng.shuffle(lines)
            runs[debate.debate_id] = lines
        permutation_maps.append(evaluate_run(runs, judgments)["MAP"])
    random_map = sum(permutation_maps) / len(permutation_maps)

    assert trained_map >= 2.0 * random_map, (
        f"trained MAP {trained_map:.4f} < 2x random MAP {random_map:.4f}")

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"end-to-end run took {elapsed:.2f}s"


def test_embedding_backend_contracts(tmp_path, stub_service):
    """All three backends satisfy the shared contract; the HTTP client
    preserves order, enforces the dimension, and a failing service makes
    the CLI exit with code 4."""
    dim = stub_service.dim
    texts = [f"sentence number {i} with words" for i in range(17)]

    fallback = HashEmbedder(dim=dim)
    store_backend = StoreBackend(build_text_store(texts, fallback))
    service = ServiceBackend(url=stub_service.url, dim=dim,
                             batch_size=4, parallelism=3, retries=0)
    for backend in (fallback, store_backend, service):
        vectors = embed_batch(texts, backend)
        assert len(vectors) == len(texts)
        assert all(v.shape == (dim,) for v in vectors)
        again = embed_batch(texts, backend)
        assert all(np.array_equal(a, b) for a, b in zip(vectors, again))

    # order preservation across concurrent chunks: compare against a
    # single-request reference
    reference = ServiceBackend(url=stub_service.url, dim=dim,
                               batch_size=100, retries=0).embed_batch(texts)
    chunked = service.embed_batch(texts)
    assert all(np.allclose(a, b) for a, b in zip(chunked, reference))

    # dimension enforcement
    stub_service.set_mode("wrong_dim")
    with pytest.raises(TransportError):
        service.embed_batch(["x"])
    stub_service.set_mode("ok")

    # non-200 surfaces as CLI exit code 4
    corpus_dir = tmp_path / "corpus"
    generate_synthetic_corpus(corpus_dir, n_debates=1, n_lines=5, seed=1)
    stub_service.set_mode("http_500")
    code = cli.main(["embed", "cache", "--input-dir", str(corpus_dir),
                     "--labeled", "--out", str(tmp_path / "c.clrk"),
                     "--service-url", stub_service.url,
                     "--embedding-dim", str(dim)])
    assert code == 4
